// SPDX-License-Identifier: Apache-2.0
#include "eq5d/config.hpp"

#include <cstdlib>
#include <fstream>

#include "eq5d/error.hpp"

namespace eq5d {

std::string expand_env(std::string_view text) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '$' && i + 1 < text.size() && text[i + 1] == '{') {
      const auto close = text.find('}', i + 2);
      if (close == std::string_view::npos) throw ConfigError("unterminated ${...} in '" + std::string(text) + "'");
      const std::string name(text.substr(i + 2, close - i - 2));
      if (const char* v = std::getenv(name.c_str())) {
        out += v;
      } else if (name == "EQ5D_SOURCE_DIR") {
        out += EQ5D_SOURCE_DIR;
      }
      i = close + 1;
    } else {
      out.push_back(text[i++]);
    }
  }
  return out;
}

std::filesystem::path default_bindings_path() {
  if (const char* v = std::getenv("EQ5D_CONFIG"); v && *v) return v;
  return std::filesystem::path(EQ5D_SOURCE_DIR) / "config" / "bindings.json";
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j, int indent) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << j.dump(indent) << '\n';
}

}  // namespace eq5d
