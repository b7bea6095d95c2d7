// SPDX-License-Identifier: Apache-2.0
#include "eq5d/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "eq5d/error.hpp"
#include "eq5d/rng.hpp"

namespace eq5d {

namespace {

constexpr std::size_t kMaxCharsPerWord = 100;

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

std::size_t utf8_len(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

/// Byte offsets of code point starts, plus the terminating size.
std::vector<std::size_t> codepoint_bounds(const std::string& s) {
  std::vector<std::size_t> b;
  for (std::size_t i = 0; i < s.size(); i += utf8_len(static_cast<unsigned char>(s[i]))) b.push_back(i);
  b.push_back(s.size());
  return b;
}

}  // namespace

std::vector<std::string> basic_tokenize(std::string_view text, bool lowercase) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    const auto c = static_cast<unsigned char>(text[i]);
    const std::size_t len = std::min(utf8_len(c), text.size() - i);
    if (len == 1) {
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        flush();
      } else if (c < 32 || c == 127) {
        // control characters are dropped
      } else if (is_ascii_punct(c)) {
        flush();
        out.emplace_back(1, static_cast<char>(c));
      } else {
        cur.push_back(lowercase && c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
      }
    } else if (len == 2 && c == 0xC2 && static_cast<unsigned char>(text[i + 1]) == 0xA0) {
      flush();  // no-break space
    } else {
      cur.append(text.substr(i, len));
    }
    i += len;
  }
  flush();
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.try_emplace(tokens_[i], static_cast<std::int32_t>(i));
  pad_ = find(kPad);
  unk_ = find(kUnk);
  cls_ = find(kCls);
  sep_ = find(kSep);
  if (pad_ < 0 || unk_ < 0 || cls_ < 0 || sep_ < 0)
    throw ConfigError("vocabulary lacks one of the special tokens [PAD] [UNK] [CLS] [SEP]");
}

Vocabulary Vocabulary::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read vocabulary '" + path.string() + "'");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write vocabulary '" + path.string() + "'");
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::build(std::span<const std::string> texts, bool lowercase, std::size_t max_words,
                             std::size_t min_freq) {
  std::map<std::string, std::size_t> freq;
  std::set<std::string> chars;
  for (const auto& text : texts) {
    for (auto& w : basic_tokenize(text, lowercase)) {
      const auto bounds = codepoint_bounds(w);
      for (std::size_t k = 0; k + 1 < bounds.size(); ++k) chars.insert(w.substr(bounds[k], bounds[k + 1] - bounds[k]));
      ++freq[std::move(w)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens = {std::string(kPad), std::string(kUnk), std::string(kCls), std::string(kSep),
                                     std::string(kMask)};
  std::set<std::string> have(tokens.begin(), tokens.end());
  for (const auto& [w, n] : ranked) {
    if (n < min_freq || tokens.size() - 5 >= max_words) break;
    if (have.insert(w).second) tokens.push_back(w);
  }
  for (const auto& c : chars) {
    if (have.insert(c).second) tokens.push_back(c);
    if (have.insert("##" + c).second) tokens.push_back("##" + c);
  }
  return Vocabulary(std::move(tokens));
}

std::int32_t Vocabulary::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : it->second;
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : tokens_) h = fnv1a64(t + '\n', h);
  return h;
}

WordPieceTokenizer::WordPieceTokenizer(Vocabulary vocab, bool lowercase, std::string tokenizer_id)
    : vocab_(std::move(vocab)), lowercase_(lowercase), id_(std::move(tokenizer_id)) {}

std::vector<std::string> WordPieceTokenizer::basic_tokenize(std::string_view text) const {
  return eq5d::basic_tokenize(text, lowercase_);
}

void WordPieceTokenizer::wordpiece(const std::string& word, std::vector<std::int32_t>& out) const {
  const auto bounds = codepoint_bounds(word);
  const std::size_t n = bounds.size() - 1;
  if (n > kMaxCharsPerWord) {
    out.push_back(vocab_.unk_id());
    return;
  }
  std::vector<std::int32_t> pieces;
  std::size_t start = 0;
  while (start < n) {
    std::int32_t found = -1;
    std::size_t end = n;
    for (; end > start; --end) {
      std::string piece = word.substr(bounds[start], bounds[end] - bounds[start]);
      if (start > 0) piece = "##" + piece;
      found = vocab_.find(piece);
      if (found >= 0) break;
    }
    if (found < 0) {
      out.push_back(vocab_.unk_id());
      return;
    }
    pieces.push_back(found);
    start = end;
  }
  out.insert(out.end(), pieces.begin(), pieces.end());
}

std::vector<std::int32_t> WordPieceTokenizer::tokenize(std::string_view text) const {
  std::vector<std::int32_t> out;
  for (const auto& w : basic_tokenize(text)) wordpiece(w, out);
  return out;
}

std::vector<std::string> WordPieceTokenizer::tokenize_to_strings(std::string_view text) const {
  std::vector<std::string> out;
  for (auto id : tokenize(text)) out.push_back(vocab_.token(id));
  return out;
}

}  // namespace eq5d
