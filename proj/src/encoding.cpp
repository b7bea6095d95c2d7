// SPDX-License-Identifier: Apache-2.0
#include "eq5d/encoding.hpp"

#include <algorithm>
#include <numeric>

#include "eq5d/error.hpp"
#include "eq5d/rng.hpp"

namespace eq5d {

std::size_t EncodedSequence::length() const {
  return static_cast<std::size_t>(std::count(attention_mask.begin(), attention_mask.end(), std::uint8_t{1}));
}

EncodedSequence encode_text(std::string_view text, const WordPieceTokenizer& tokenizer, std::size_t max_len,
                            Label label, Origin origin) {
  if (max_len < 2) throw ValidationError("max_len must leave room for [CLS] and [SEP]");
  const auto& vocab = tokenizer.vocab();
  auto pieces = tokenizer.tokenize(text);
  if (pieces.size() > max_len - 2) pieces.resize(max_len - 2);

  EncodedSequence seq;
  seq.token_ids.reserve(max_len);
  seq.token_ids.push_back(vocab.cls_id());
  seq.token_ids.insert(seq.token_ids.end(), pieces.begin(), pieces.end());
  seq.token_ids.push_back(vocab.sep_id());
  seq.attention_mask.assign(seq.token_ids.size(), 1);
  seq.token_ids.resize(max_len, vocab.pad_id());
  seq.attention_mask.resize(max_len, 0);
  seq.label = label;
  seq.origin = std::move(origin);
  seq.tokenizer_id = tokenizer.id();
  return seq;
}

std::vector<EncodedSequence> encode(std::span<const EnrichedSentence> sentences, const WordPieceTokenizer& tokenizer,
                                    std::size_t max_len) {
  std::vector<EncodedSequence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences)
    out.push_back(encode_text(s.enriched_text, tokenizer, max_len, s.inherited_label, {s.study_id, s.sentence_index}));
  return out;
}

BatchStream::BatchStream(std::size_t n, BatchPlan plan, Regime regime, std::uint64_t epoch_seed)
    : order_(n), batch_size_(plan.batch_size) {
  if (n == 0) throw ValidationError("cannot batch an empty sequence set");
  if (batch_size_ == 0) throw ValidationError("batch_size must be positive");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (regime == Regime::train) Rng(epoch_seed).shuffle(std::span(order_));
}

std::optional<std::span<const std::size_t>> BatchStream::next() {
  if (pos_ >= order_.size()) return std::nullopt;
  const std::size_t len = std::min(batch_size_, order_.size() - pos_);
  std::span<const std::size_t> batch(order_.data() + pos_, len);
  pos_ += len;
  return batch;
}

std::size_t BatchStream::batch_count() const { return (order_.size() + batch_size_ - 1) / batch_size_; }

std::vector<std::vector<const EncodedSequence*>> iterate_batches(std::span<const EncodedSequence> sequences,
                                                                 BatchPlan plan, Regime regime,
                                                                 std::uint64_t epoch_seed) {
  BatchStream stream(sequences.size(), plan, regime, epoch_seed);
  std::vector<std::vector<const EncodedSequence*>> out;
  while (auto batch = stream.next()) {
    auto& b = out.emplace_back();
    for (auto i : *batch) b.push_back(&sequences[i]);
  }
  return out;
}

std::uint64_t epoch_seed(std::uint64_t run_seed, std::size_t epoch) { return derive_seed(run_seed, epoch); }

}  // namespace eq5d
