// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace eq5d {

/// Replaces ${NAME} with the environment variable NAME. EQ5D_SOURCE_DIR falls
/// back to the source tree this library was built from. Unset variables
/// expand to the empty string.
std::string expand_env(std::string_view text);

/// $EQ5D_CONFIG if set, else <source>/config/bindings.json.
std::filesystem::path default_bindings_path();

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j, int indent = 2);

}  // namespace eq5d
