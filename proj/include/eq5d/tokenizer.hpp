// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace eq5d {

/// WordPiece vocabulary: token string ↔ id, with the BERT special tokens.
class Vocabulary {
 public:
  static constexpr std::string_view kPad = "[PAD]";
  static constexpr std::string_view kUnk = "[UNK]";
  static constexpr std::string_view kCls = "[CLS]";
  static constexpr std::string_view kSep = "[SEP]";
  static constexpr std::string_view kMask = "[MASK]";

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  /// One token per line, id = line number (the vocab.txt layout).
  static Vocabulary from_file(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Word-level vocabulary for a randomly initialised backbone: specials, the
  /// most frequent basic tokens, then every single character seen (plain and
  /// "##"-prefixed) so WordPiece never needs [UNK] on the training text.
  static Vocabulary build(std::span<const std::string> texts, bool lowercase, std::size_t max_words = 8000,
                          std::size_t min_freq = 1);

  /// -1 when absent.
  std::int32_t find(std::string_view token) const;
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::int32_t pad_id() const { return pad_; }
  std::int32_t unk_id() const { return unk_; }
  std::int32_t cls_id() const { return cls_; }
  std::int32_t sep_id() const { return sep_; }

  std::uint64_t fingerprint() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
  std::int32_t pad_ = -1, unk_ = -1, cls_ = -1, sep_ = -1;
};

/// BERT-style tokenizer: basic whitespace/punctuation pre-tokenization
/// (optionally ASCII-lowercased) followed by greedy longest-match WordPiece.
class WordPieceTokenizer {
 public:
  WordPieceTokenizer(Vocabulary vocab, bool lowercase, std::string tokenizer_id);

  std::vector<std::string> basic_tokenize(std::string_view text) const;
  /// WordPiece ids without special tokens.
  std::vector<std::int32_t> tokenize(std::string_view text) const;
  std::vector<std::string> tokenize_to_strings(std::string_view text) const;

  const Vocabulary& vocab() const { return vocab_; }
  bool lowercase() const { return lowercase_; }
  const std::string& id() const { return id_; }

 private:
  void wordpiece(const std::string& word, std::vector<std::int32_t>& out) const;

  Vocabulary vocab_;
  bool lowercase_;
  std::string id_;
};

std::vector<std::string> basic_tokenize(std::string_view text, bool lowercase);

}  // namespace eq5d
