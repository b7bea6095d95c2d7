// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eq5d/classifier.hpp"

namespace eq5d {

/// One abstract as a bag of its encoded sentences, carrying the study label.
struct Bag {
  std::string study_id;
  std::vector<EncodedSequence> instances;
  Label label = Label::negative;
};

/// Groups sequences by study (ordered by study id, instances by sentence
/// index). Bags longer than max_instances keep their first sentences and log
/// a warning. Throws ValidationError if a study's sequences disagree on label.
std::vector<Bag> make_bags(std::span<const EncodedSequence> sequences, std::size_t max_instances = 64);

struct BagPrediction {
  std::string study_id;
  double p_positive = 0.0;
  double p_negative = 0.0;
  Label predicted_label = Label::negative;
  std::vector<double> attention_weights;
};

/// Pooled representation of every instance, one row each (no gradient).
nn::Matrix embed_instances(const TrainedModel& model, const Bag& bag);

/// max(1, round(batch_size / mean bag size)) bags per step.
std::size_t bags_per_batch(std::span<const Bag> bags, std::size_t sentence_batch_size);

/// End-to-end training of encoder, attention pool and head on bag labels,
/// early-stopped on validation bag F1.
std::pair<TrainedModel, TrainHistory> mil_train(const Backbone& backbone, std::span<const Bag> train,
                                                std::span<const Bag> val, const TrainConfig& config,
                                                const EpochCallback& on_epoch = {});

BagPrediction mil_predict(const TrainedModel& model, const Bag& bag);

nlohmann::json to_json(const BagPrediction& p);
BagPrediction bag_prediction_from_json(const nlohmann::json& j);
void save_bag_predictions(const std::filesystem::path& path, std::span<const BagPrediction> preds);
std::vector<BagPrediction> load_bag_predictions(const std::filesystem::path& path);

}  // namespace eq5d
