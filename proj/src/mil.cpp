// SPDX-License-Identifier: Apache-2.0
#include "eq5d/mil.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <spdlog/spdlog.h>

#include "eq5d/error.hpp"
#include "eq5d/evaluation.hpp"

namespace eq5d {

std::vector<Bag> make_bags(std::span<const EncodedSequence> sequences, std::size_t max_instances) {
  std::map<std::string, std::vector<const EncodedSequence*>> groups;
  for (const auto& s : sequences) groups[s.origin.study_id].push_back(&s);
  std::vector<Bag> bags;
  bags.reserve(groups.size());
  for (auto& [id, members] : groups) {
    std::sort(members.begin(), members.end(),
              [](const auto* a, const auto* b) { return a->origin.sentence_index < b->origin.sentence_index; });
    Bag bag;
    bag.study_id = id;
    bag.label = members.front()->label;
    for (const auto* m : members) {
      if (m->label != bag.label) throw ValidationError("study '" + id + "' has sentences with different labels");
    }
    if (members.size() > max_instances) {
      spdlog::warn("study '{}' has {} sentences; keeping the first {}", id, members.size(), max_instances);
      members.resize(max_instances);
    }
    for (const auto* m : members) bag.instances.push_back(*m);
    bags.push_back(std::move(bag));
  }
  return bags;
}

namespace {

void check_bag(const TrainedModel& model, const Bag& bag) {
  if (bag.instances.empty()) throw ValidationError("bag '" + bag.study_id + "' is empty");
  check_tokenizer(model, bag.instances);
}

nn::Var bag_embeddings(const ClassifierNetwork& net, const Bag& bag) {
  std::vector<nn::Var> rows;
  rows.reserve(bag.instances.size());
  for (const auto& inst : bag.instances) rows.push_back(net.embed(inst));
  return rows.size() == 1 ? rows.front() : nn::concat_rows(rows);
}

BagPrediction predict_with(const ClassifierNetwork& net, const Bag& bag) {
  nn::NoGradGuard guard;
  nn::Matrix weights;
  const nn::Var z = net.pool()(bag_embeddings(net, bag), &weights);
  const nn::Matrix p = nn::softmax_rows(net.head(z).value());
  BagPrediction out;
  out.study_id = bag.study_id;
  out.p_positive = p(0, 1);
  out.p_negative = p(0, 0);
  out.predicted_label = max_confidence_label(out.p_positive, out.p_negative);
  out.attention_weights.assign(weights.data(), weights.data() + weights.size());
  return out;
}

double bag_f1(const ClassifierNetwork& net, std::span<const Bag> bags) {
  std::vector<LabeledPrediction> items;
  items.reserve(bags.size());
  for (const auto& b : bags) items.push_back({b.label, predict_with(net, b).predicted_label});
  return compute_metrics(items, Level::bag).f1;
}

}  // namespace

nn::Matrix embed_instances(const TrainedModel& model, const Bag& bag) {
  check_bag(model, bag);
  nn::NoGradGuard guard;
  return bag_embeddings(*model.network, bag).value();
}

std::size_t bags_per_batch(std::span<const Bag> bags, std::size_t sentence_batch_size) {
  if (bags.empty()) return 1;
  std::size_t instances = 0;
  for (const auto& b : bags) instances += b.instances.size();
  const double mean = static_cast<double>(instances) / static_cast<double>(bags.size());
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(sentence_batch_size) / mean)));
}

std::pair<TrainedModel, TrainHistory> mil_train(const Backbone& backbone, std::span<const Bag> train,
                                                std::span<const Bag> val, const TrainConfig& config,
                                                const EpochCallback& on_epoch) {
  if (train.empty() || val.empty()) throw ValidationError("mil_train needs non-empty train and validation bags");
  TrainedModel model;
  model.backbone = backbone;
  model.config = config;
  for (const auto& b : train) check_bag(model, b);
  for (const auto& b : val) check_bag(model, b);
  bool pos = false, neg = false;
  for (const auto& b : val) (b.label == Label::positive ? pos : neg) = true;
  if (!(pos && neg)) spdlog::warn("validation bags lack one class; F1 is degenerate");

  model.network = std::make_shared<ClassifierNetwork>(backbone, config.seed, true, config.attention_dim);
  auto& net = *model.network;

  TrainingTask task;
  task.n_items = train.size();
  task.batch_size = bags_per_batch(train, config.batch_size);
  task.batch_loss = [&](std::span<const std::size_t> batch) {
    std::vector<nn::Var> losses;
    losses.reserve(batch.size());
    for (std::size_t i : batch) {
      const nn::Var z = net.pool()(bag_embeddings(net, train[i]));
      losses.push_back(nn::cross_entropy(net.head(z), to_int(train[i].label)));
    }
    return nn::sum_scalars(losses, 1.0 / static_cast<double>(batch.size()));
  };
  task.validate = [&] { return bag_f1(net, val); };

  TrainHistory history = run_training(net, task, config, on_epoch);
  model.best_epoch = history.best_epoch;
  model.best_val_f1 = history.best_val_f1;
  return {std::move(model), std::move(history)};
}

BagPrediction mil_predict(const TrainedModel& model, const Bag& bag) {
  if (!model.network->has_attention_pool()) throw ConfigError("model has no attention pool");
  check_bag(model, bag);
  return predict_with(*model.network, bag);
}

nlohmann::json to_json(const BagPrediction& p) {
  return {{"study_id", p.study_id},
          {"p_positive", p.p_positive},
          {"p_negative", p.p_negative},
          {"predicted_label", to_int(p.predicted_label)},
          {"attention_weights", p.attention_weights}};
}

BagPrediction bag_prediction_from_json(const nlohmann::json& j) {
  BagPrediction p;
  p.study_id = j.at("study_id").get<std::string>();
  p.p_positive = j.at("p_positive").get<double>();
  p.p_negative = j.at("p_negative").get<double>();
  p.predicted_label = label_from_bool(j.at("predicted_label").get<int>() != 0);
  p.attention_weights = j.at("attention_weights").get<std::vector<double>>();
  return p;
}

void save_bag_predictions(const std::filesystem::path& path, std::span<const BagPrediction> preds) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& p : preds) out << to_json(p).dump() << '\n';
}

std::vector<BagPrediction> load_bag_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<BagPrediction> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(bag_prediction_from_json(nlohmann::json::parse(line)));
  return out;
}

}  // namespace eq5d
