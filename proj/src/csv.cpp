// SPDX-License-Identifier: Apache-2.0
#include "eq5d/csv.hpp"

#include "eq5d/error.hpp"

namespace eq5d::csv {

std::optional<std::vector<std::string>> Reader::next_row() {
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  row_line_ = line_;

  int ch;
  while ((ch = in_.get()) != std::char_traits<char>::eof()) {
    any = true;
    const char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in_.peek() == '"') {
          in_.get();
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line_;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      in_quotes = true;
    } else if (c == delimiter_) {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\r') {
      // swallowed; CRLF and bare CR both end up at the '\n' branch or EOF
    } else if (c == '\n') {
      ++line_;
      row.push_back(std::move(field));
      return row;
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) throw IngestionError("unterminated quoted field starting on line " + std::to_string(row_line_));
  if (!any) return std::nullopt;
  row.push_back(std::move(field));
  return row;
}

std::string escape_field(const std::string& field, char delimiter) {
  if (field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace eq5d::csv
