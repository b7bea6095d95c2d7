// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eq5d/corpus.hpp"
#include "eq5d/enrichment.hpp"
#include "eq5d/tokenizer.hpp"

namespace eq5d {

struct Origin {
  std::string study_id;
  std::size_t sentence_index = 0;

  auto operator<=>(const Origin&) const = default;
};

/// Fixed-length [CLS] tokens [SEP] [PAD]... sequence. The mask is 1 on a
/// prefix and 0 on the padding suffix.
struct EncodedSequence {
  std::vector<std::int32_t> token_ids;
  std::vector<std::uint8_t> attention_mask;
  Label label = Label::negative;
  Origin origin;
  std::string tokenizer_id;

  /// Number of real (unmasked) positions.
  std::size_t length() const;
};

inline constexpr std::size_t kDefaultMaxLen = 256;

/// Head-keeping truncation: the first max_len - 2 word pieces survive, so an
/// [ENTS: ...] suffix is the first thing lost on very long sentences.
EncodedSequence encode_text(std::string_view text, const WordPieceTokenizer& tokenizer, std::size_t max_len,
                            Label label = Label::negative, Origin origin = {});

std::vector<EncodedSequence> encode(std::span<const EnrichedSentence> sentences, const WordPieceTokenizer& tokenizer,
                                    std::size_t max_len = kDefaultMaxLen);

struct BatchPlan {
  std::size_t batch_size = 16;
};

enum class Regime { train, eval };

/// Single-consumer stream of index batches over n items. Train order is a
/// permutation fixed by epoch_seed; eval order is the input order. The last
/// batch may be short.
class BatchStream {
 public:
  BatchStream(std::size_t n, BatchPlan plan, Regime regime, std::uint64_t epoch_seed);

  std::optional<std::span<const std::size_t>> next();
  std::size_t batch_count() const;

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::size_t pos_ = 0;
};

/// Materialises every batch of one epoch as pointers into `sequences`.
/// Throws ValidationError on empty input.
std::vector<std::vector<const EncodedSequence*>> iterate_batches(std::span<const EncodedSequence> sequences,
                                                                 BatchPlan plan, Regime regime,
                                                                 std::uint64_t epoch_seed);

/// Per-epoch seed: a hash of (run seed, epoch).
std::uint64_t epoch_seed(std::uint64_t run_seed, std::size_t epoch);

}  // namespace eq5d
