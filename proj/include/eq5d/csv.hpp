// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace eq5d::csv {

/// RFC 4180 reader: quoted fields may contain the delimiter, doubled quotes
/// and line breaks. Returns std::nullopt at end of input.
class Reader {
 public:
  explicit Reader(std::istream& in, char delimiter = ',') : in_(in), delimiter_(delimiter) {}

  std::optional<std::vector<std::string>> next_row();

  /// 1-based physical line on which the last returned row started.
  std::size_t line() const { return row_line_; }

 private:
  std::istream& in_;
  char delimiter_;
  std::size_t line_ = 1;
  std::size_t row_line_ = 0;
};

std::string escape_field(const std::string& field, char delimiter = ',');

}  // namespace eq5d::csv
