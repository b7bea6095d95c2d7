// SPDX-License-Identifier: Apache-2.0
#pragma once
// Synthetic abstracts for smoke runs: every positive study carries exactly one
// marker sentence naming the EQ-5D instrument; all other sentences come from
// one shared filler distribution regardless of label.

#include <cstdint>
#include <string_view>
#include <vector>

#include "eq5d/corpus.hpp"

namespace eq5d {

struct SyntheticSpec {
  std::size_t n_studies = 400;
  double positive_fraction = 0.4;
  std::size_t min_sentences = 2;
  std::size_t max_sentences = 2;
  std::uint64_t seed = 7;
  /// Fillers are drawn from a fixed pool so that each one recurs under both
  /// labels and cannot be memorised as evidence.
  std::size_t filler_pool = 12;
};

std::vector<StudyRecord> synthetic_corpus(const SyntheticSpec& spec);

/// True for sentences produced by the marker templates.
bool is_marker_sentence(std::string_view sentence);

}  // namespace eq5d
