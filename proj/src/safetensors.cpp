// SPDX-License-Identifier: Apache-2.0
#include "eq5d/safetensors.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eq5d/error.hpp"

namespace eq5d {

static_assert(std::endian::native == std::endian::little, "safetensors I/O assumes a little-endian host");

namespace {

double half_to_double(std::uint16_t h) {
  const int sign = (h >> 15) & 1;
  const int exp = (h >> 10) & 0x1f;
  const int mant = h & 0x3ff;
  double v;
  if (exp == 0) {
    v = std::ldexp(static_cast<double>(mant), -24);
  } else if (exp == 31) {
    v = mant == 0 ? INFINITY : NAN;
  } else {
    v = std::ldexp(static_cast<double>(mant | 0x400), exp - 25);
  }
  return sign ? -v : v;
}

double bf16_to_double(std::uint16_t b) {
  const std::uint32_t bits = static_cast<std::uint32_t>(b) << 16;
  return static_cast<double>(std::bit_cast<float>(bits));
}

std::uint16_t double_to_bf16(double d) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(d));
  const std::uint32_t rounding = 0x7fff + ((bits >> 16) & 1);
  return static_cast<std::uint16_t>((bits + rounding) >> 16);
}

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "F64") return 8;
  if (dtype == "F32") return 4;
  if (dtype == "F16" || dtype == "BF16") return 2;
  throw ConfigError("unsupported safetensors dtype '" + dtype + "'");
}

}  // namespace

SafetensorsFile parse_safetensors(const std::string& bytes) {
  if (bytes.size() < 8) throw ConfigError("safetensors: truncated header length");
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data(), 8);
  if (header_len > bytes.size() - 8) throw ConfigError("safetensors: header length exceeds file size");
  const auto header = nlohmann::json::parse(bytes.substr(8, header_len));
  const std::size_t base = 8 + header_len;

  SafetensorsFile file;
  for (const auto& [name, info] : header.items()) {
    if (name == "__metadata__") {
      for (const auto& [k, v] : info.items()) file.metadata[k] = v.get<std::string>();
      continue;
    }
    const auto dtype = info.at("dtype").get<std::string>();
    const auto shape = info.at("shape").get<std::vector<std::size_t>>();
    const auto offsets = info.at("data_offsets").get<std::vector<std::size_t>>();
    const std::size_t width = dtype_size(dtype);
    std::size_t count = 1;
    for (auto d : shape) count *= d;
    if (offsets.size() != 2 || offsets[1] < offsets[0] || offsets[1] - offsets[0] != count * width ||
        base + offsets[1] > bytes.size())
      throw ConfigError("safetensors: inconsistent offsets for '" + name + "'");

    Eigen::Index rows = 1, cols = 1;
    if (shape.size() == 1) {
      cols = static_cast<Eigen::Index>(shape[0]);
    } else if (shape.size() == 2) {
      rows = static_cast<Eigen::Index>(shape[0]);
      cols = static_cast<Eigen::Index>(shape[1]);
    } else if (shape.empty()) {
      // scalar
    } else {
      throw ConfigError("safetensors: tensor '" + name + "' has rank " + std::to_string(shape.size()));
    }
    nn::Matrix m(rows, cols);
    const char* src = bytes.data() + base + offsets[0];
    for (std::size_t i = 0; i < count; ++i) {
      double v = 0.0;
      if (dtype == "F64") {
        std::memcpy(&v, src + 8 * i, 8);
      } else if (dtype == "F32") {
        float f;
        std::memcpy(&f, src + 4 * i, 4);
        v = f;
      } else {
        std::uint16_t h;
        std::memcpy(&h, src + 2 * i, 2);
        v = dtype == "F16" ? half_to_double(h) : bf16_to_double(h);
      }
      m.data()[i] = v;
    }
    file.tensors.emplace(name, std::move(m));
  }
  return file;
}

SafetensorsFile read_safetensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read weights '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_safetensors(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed safetensors header in '" + path.string() + "': " + e.what());
  }
}

std::string serialize_safetensors(const nn::StateDict& tensors, const std::map<std::string, std::string>& metadata,
                                  const std::string& dtype) {
  const std::size_t width = dtype_size(dtype);
  if (dtype == "F16") throw ConfigError("writing F16 is not supported");
  nlohmann::json header = nlohmann::json::object();
  if (!metadata.empty()) header["__metadata__"] = metadata;
  std::string payload;
  for (const auto& [name, m] : tensors) {
    const std::size_t begin = payload.size();
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double v = m.data()[i];
      char buf[8];
      if (dtype == "F64") {
        std::memcpy(buf, &v, 8);
      } else if (dtype == "F32") {
        const float f = static_cast<float>(v);
        std::memcpy(buf, &f, 4);
      } else {
        const std::uint16_t b = double_to_bf16(v);
        std::memcpy(buf, &b, 2);
      }
      payload.append(buf, width);
    }
    nlohmann::json shape = m.rows() == 1 ? nlohmann::json::array({m.cols()}) : nlohmann::json::array({m.rows(), m.cols()});
    header[name] = {{"dtype", dtype}, {"shape", shape}, {"data_offsets", {begin, payload.size()}}};
  }
  std::string head = header.dump();
  while ((8 + head.size()) % 8 != 0) head.push_back(' ');
  const std::uint64_t len = head.size();
  std::string out(8, '\0');
  std::memcpy(out.data(), &len, 8);
  return out + head + payload;
}

void write_safetensors(const std::filesystem::path& path, const nn::StateDict& tensors,
                       const std::map<std::string, std::string>& metadata) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write '" + tmp + "'");
    const std::string bytes = serialize_safetensors(tensors, metadata);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace eq5d
