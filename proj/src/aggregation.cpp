// SPDX-License-Identifier: Apache-2.0
#include "eq5d/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "eq5d/error.hpp"

namespace eq5d {

Label max_confidence_label(double p_positive, double p_negative) {
  return p_positive + kTieTolerance >= p_negative ? Label::positive : Label::negative;
}

StudyPrediction aggregate_study(std::span<const PredictionRecord> preds) {
  if (preds.empty()) throw ValidationError("aggregate_study: no sentence predictions");
  const std::string& id = preds.front().study_id;
  std::vector<const PredictionRecord*> ordered;
  ordered.reserve(preds.size());
  for (const auto& p : preds) {
    if (p.study_id != id)
      throw ValidationError("aggregate_study: mixed study ids '" + id + "' and '" + p.study_id + "'");
    if (!(p.p_positive >= 0.0 && p.p_negative >= 0.0) || std::abs(p.p_positive + p.p_negative - 1.0) > 1e-6)
      throw ValidationError("aggregate_study: confidences of study '" + id + "' sentence " +
                            std::to_string(p.sentence_index) + " do not sum to 1");
    ordered.push_back(&p);
  }
  std::sort(ordered.begin(), ordered.end(), [](const PredictionRecord* a, const PredictionRecord* b) {
    if (a->sentence_index != b->sentence_index) return a->sentence_index < b->sentence_index;
    return a->p_positive < b->p_positive;
  });

  double pos = 0.0, neg = 0.0;
  for (const auto* p : ordered) {
    pos += p->p_positive;
    neg += p->p_negative;
  }
  const double n = static_cast<double>(ordered.size());
  StudyPrediction out;
  out.study_id = id;
  out.mean_p_positive = pos / n;
  out.mean_p_negative = neg / n;
  out.predicted_label = max_confidence_label(out.mean_p_positive, out.mean_p_negative);
  out.n_sentences = ordered.size();
  return out;
}

std::vector<StudyPrediction> aggregate_corpus(std::span<const PredictionRecord> preds) {
  std::map<std::string, std::vector<PredictionRecord>> groups;
  for (const auto& p : preds) groups[p.study_id].push_back(p);
  std::vector<StudyPrediction> out;
  out.reserve(groups.size());
  for (const auto& [_, g] : groups) out.push_back(aggregate_study(g));
  return out;
}

nlohmann::json to_json(const PredictionRecord& p) {
  return {{"study_id", p.study_id},
          {"sentence_index", p.sentence_index},
          {"p_positive", p.p_positive},
          {"p_negative", p.p_negative},
          {"predicted_label", to_int(p.predicted_label)}};
}

PredictionRecord prediction_from_json(const nlohmann::json& j) {
  return {j.at("study_id").get<std::string>(), j.at("sentence_index").get<std::size_t>(),
          j.at("p_positive").get<double>(), j.at("p_negative").get<double>(),
          label_from_bool(j.at("predicted_label").get<int>() != 0)};
}

nlohmann::json to_json(const StudyPrediction& p) {
  return {{"study_id", p.study_id},
          {"mean_p_positive", p.mean_p_positive},
          {"mean_p_negative", p.mean_p_negative},
          {"predicted_label", to_int(p.predicted_label)},
          {"n_sentences", p.n_sentences}};
}

StudyPrediction study_prediction_from_json(const nlohmann::json& j) {
  return {j.at("study_id").get<std::string>(), j.at("mean_p_positive").get<double>(),
          j.at("mean_p_negative").get<double>(), label_from_bool(j.at("predicted_label").get<int>() != 0),
          j.at("n_sentences").get<std::size_t>()};
}

namespace {

template <typename T>
void save_lines(const std::filesystem::path& path, std::span<const T> items) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  for (const auto& it : items) out << to_json(it).dump() << '\n';
}

template <typename T, typename F>
std::vector<T> load_lines(const std::filesystem::path& path, F parse) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  std::vector<T> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(parse(nlohmann::json::parse(line)));
  return out;
}

}  // namespace

void save_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> preds) {
  save_lines(path, preds);
}
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  return load_lines<PredictionRecord>(path, prediction_from_json);
}
void save_study_predictions(const std::filesystem::path& path, std::span<const StudyPrediction> preds) {
  save_lines(path, preds);
}
std::vector<StudyPrediction> load_study_predictions(const std::filesystem::path& path) {
  return load_lines<StudyPrediction>(path, study_prediction_from_json);
}

}  // namespace eq5d
