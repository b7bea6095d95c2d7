// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reader/writer for the safetensors container: an 8-byte little-endian header
// length, a JSON header mapping tensor names to {dtype, shape, data_offsets},
// then the raw little-endian tensor bytes. Tensors of rank 1 load as 1 x n
// rows; rank 2 as-is.

#include <filesystem>
#include <map>
#include <string>

#include "eq5d/autograd.hpp"

namespace eq5d {

struct SafetensorsFile {
  nn::StateDict tensors;
  std::map<std::string, std::string> metadata;
};

/// Supports F64, F32, F16 and BF16 payloads; other dtypes throw ConfigError.
SafetensorsFile read_safetensors(const std::filesystem::path& path);
SafetensorsFile parse_safetensors(const std::string& bytes);

/// Writes every tensor as F64; single-row matrices are stored as rank 1.
void write_safetensors(const std::filesystem::path& path, const nn::StateDict& tensors,
                       const std::map<std::string, std::string>& metadata = {});
/// dtype is F64, F32 or BF16.
std::string serialize_safetensors(const nn::StateDict& tensors, const std::map<std::string, std::string>& metadata,
                                  const std::string& dtype = "F64");

}  // namespace eq5d
