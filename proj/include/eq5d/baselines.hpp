// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "eq5d/corpus.hpp"

namespace eq5d {

/// Lowercase, replace ASCII punctuation with spaces, split on whitespace.
std::vector<std::string> bow_tokenize(std::string_view text);

/// Multinomial Naive Bayes over abstract tokens with additive smoothing.
struct BowModel {
  double alpha = 1.0;
  std::map<std::string, std::size_t> vocabulary;  // token → column
  std::size_t n_docs[2] = {0, 0};                 // by label: [negative, positive]
  std::vector<double> counts[2];                  // token counts per class, by column
  double total_counts[2] = {0.0, 0.0};

  double log_prior(Label c) const;
  /// log P(token | class) for an in-vocabulary column.
  double log_likelihood(Label c, std::size_t column) const;
};

struct BowScores {
  Label label = Label::negative;
  double log_positive = 0.0;
  double log_negative = 0.0;
};

/// Throws ValidationError for alpha <= 0, an empty set or a single class.
BowModel bow_train(std::span<const StudyRecord> train, double alpha = 1.0);
/// Out-of-vocabulary tokens are ignored; ties go to positive.
BowScores bow_predict(const BowModel& model, std::string_view abstract_text);

nlohmann::json to_json(const BowModel& m);
BowModel bow_model_from_json(const nlohmann::json& j);

}  // namespace eq5d
