// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eq5d/corpus.hpp"

namespace eq5d {

/// Per-sentence class confidences (softmax outputs, summing to 1).
struct PredictionRecord {
  std::string study_id;
  std::size_t sentence_index = 0;
  double p_positive = 0.0;
  double p_negative = 0.0;
  Label predicted_label = Label::negative;
};

struct StudyPrediction {
  std::string study_id;
  double mean_p_positive = 0.0;
  double mean_p_negative = 0.0;
  Label predicted_label = Label::negative;
  std::size_t n_sentences = 0;

  bool operator==(const StudyPrediction&) const = default;
};

/// Two confidences are treated as tied when they differ by at most this much.
inline constexpr double kTieTolerance = 1e-12;

/// Max-confidence label; ties go to positive.
Label max_confidence_label(double p_positive, double p_negative);

/// Unweighted mean of each class confidence over the study's sentences, then
/// the max-confidence label. Sentences are summed in sentence_index order so
/// the result does not depend on input order. Throws ValidationError on an
/// empty list, mixed study ids, or confidences that do not sum to 1.
StudyPrediction aggregate_study(std::span<const PredictionRecord> preds);

/// One prediction per distinct study, ordered by study_id.
std::vector<StudyPrediction> aggregate_corpus(std::span<const PredictionRecord> preds);

nlohmann::json to_json(const PredictionRecord& p);
PredictionRecord prediction_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StudyPrediction& p);
StudyPrediction study_prediction_from_json(const nlohmann::json& j);

void save_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> preds);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);
void save_study_predictions(const std::filesystem::path& path, std::span<const StudyPrediction> preds);
std::vector<StudyPrediction> load_study_predictions(const std::filesystem::path& path);

}  // namespace eq5d
