// SPDX-License-Identifier: Apache-2.0
#include "eq5d/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "eq5d/csv.hpp"
#include "eq5d/error.hpp"

namespace eq5d {

std::string_view to_string(Level level) {
  switch (level) {
    case Level::sentence: return "sentence";
    case Level::study: return "study";
    case Level::bag: return "bag";
  }
  return "?";
}

Level parse_level(std::string_view s) {
  if (s == "sentence") return Level::sentence;
  if (s == "study") return Level::study;
  if (s == "bag") return Level::bag;
  throw ValidationError("unknown level '" + std::string(s) + "'");
}

MetricsReport metrics_from_counts(const Confusion& c, Level level, std::string run_id, std::string config_id) {
  if (c.total() == 0) throw ValidationError("metrics over zero items");
  MetricsReport r;
  r.level = level;
  r.counts = c;
  r.run_id = std::move(run_id);
  r.config_id = std::move(config_id);
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  r.accuracy = d(c.tp + c.tn) / d(c.total());
  r.precision_undefined = c.tp + c.fp == 0;
  r.recall_undefined = c.tp + c.fn == 0;
  r.precision = r.precision_undefined ? 0.0 : d(c.tp) / d(c.tp + c.fp);
  r.recall = r.recall_undefined ? 0.0 : d(c.tp) / d(c.tp + c.fn);
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

MetricsReport compute_metrics(std::span<const LabeledPrediction> items, Level level, std::string run_id,
                              std::string config_id) {
  if (items.empty()) throw ValidationError("compute_metrics: no predictions");
  Confusion c;
  for (const auto& it : items) {
    const bool g = it.gold == Label::positive;
    const bool p = it.predicted == Label::positive;
    if (g && p) ++c.tp;
    else if (!g && p) ++c.fp;
    else if (g && !p) ++c.fn;
    else ++c.tn;
  }
  return metrics_from_counts(c, level, std::move(run_id), std::move(config_id));
}

MetricsReport metrics_from_values(double accuracy, double precision, double recall, double f1, Level level,
                                  std::string run_id, std::string config_id) {
  MetricsReport r;
  r.level = level;
  r.accuracy = accuracy;
  r.precision = precision;
  r.recall = recall;
  r.f1 = f1;
  r.run_id = std::move(run_id);
  r.config_id = std::move(config_id);
  return r;
}

AveragedReport average_runs(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw ValidationError("average_runs: no reports");
  AveragedReport a;
  a.level = reports.front().level;
  a.config_id = reports.front().config_id;
  for (const auto& r : reports) {
    if (r.level != a.level || r.config_id != a.config_id)
      throw ValidationError("average_runs: reports mix configurations or levels");
    a.accuracy += r.accuracy;
    a.precision += r.precision;
    a.recall += r.recall;
    a.f1 += r.f1;
  }
  const double n = static_cast<double>(reports.size());
  a.accuracy /= n;
  a.precision /= n;
  a.recall /= n;
  a.f1 /= n;
  a.n_runs = reports.size();
  a.runs.assign(reports.begin(), reports.end());
  return a;
}

std::string format_metric(double v) {
  char buf[32];
  // Nudge values like 0.785 that sit just below the half in binary.
  std::snprintf(buf, sizeof buf, "%.2f", v + (v >= 0 ? 1e-9 : -1e-9));
  return buf;
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j = {{"level", to_string(r.level)},
                      {"accuracy", r.accuracy},
                      {"precision", r.precision},
                      {"recall", r.recall},
                      {"f1", r.f1},
                      {"precision_undefined", r.precision_undefined},
                      {"recall_undefined", r.recall_undefined},
                      {"run_id", r.run_id},
                      {"config_id", r.config_id}};
  if (r.counts) j["counts"] = {{"tp", r.counts->tp}, {"fp", r.counts->fp}, {"fn", r.counts->fn}, {"tn", r.counts->tn}};
  return j;
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport r = metrics_from_values(j.at("accuracy").get<double>(), j.at("precision").get<double>(),
                                        j.at("recall").get<double>(), j.at("f1").get<double>(),
                                        parse_level(j.at("level").get<std::string>()), j.value("run_id", std::string{}),
                                        j.value("config_id", std::string{}));
  r.precision_undefined = j.value("precision_undefined", false);
  r.recall_undefined = j.value("recall_undefined", false);
  if (j.contains("counts")) {
    const auto& c = j.at("counts");
    r.counts = Confusion{c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(), c.at("fn").get<std::size_t>(),
                         c.at("tn").get<std::size_t>()};
  }
  return r;
}

std::vector<LabeledPrediction> join_sentence_golds(std::span<const PredictionRecord> preds,
                                                   std::span<const EnrichedSentence> golds) {
  std::map<std::pair<std::string, std::size_t>, Label> gold;
  for (const auto& s : golds) gold[{s.study_id, s.sentence_index}] = s.inherited_label;
  std::vector<LabeledPrediction> out;
  out.reserve(preds.size());
  for (const auto& p : preds) {
    const auto it = gold.find({p.study_id, p.sentence_index});
    if (it == gold.end())
      throw ValidationError("no gold sentence for study '" + p.study_id + "' index " + std::to_string(p.sentence_index));
    out.push_back({it->second, p.predicted_label});
  }
  return out;
}

std::vector<LabeledPrediction> join_study_golds(std::span<const StudyPrediction> preds,
                                                std::span<const StudyRecord> golds) {
  std::map<std::string, Label> gold;
  for (const auto& r : golds) gold[r.study_id] = r.label;
  std::vector<LabeledPrediction> out;
  out.reserve(preds.size());
  for (const auto& p : preds) {
    const auto it = gold.find(p.study_id);
    if (it == gold.end()) throw ValidationError("no gold label for study '" + p.study_id + "'");
    out.push_back({it->second, p.predicted_label});
  }
  return out;
}

std::string Table::to_markdown() const {
  std::ostringstream out;
  if (!title.empty()) out << "### " << title << "\n\n";
  auto line = [&](const std::vector<std::string>& cells) {
    out << '|';
    for (const auto& c : cells) out << ' ' << c << " |";
    out << '\n';
  };
  line(header);
  out << '|';
  for (std::size_t i = 0; i < header.size(); ++i) out << (i == 0 ? " --- |" : " ---: |");
  out << '\n';
  for (const auto& r : rows) line(r);
  return out.str();
}

std::string Table::to_csv() const {
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv::escape_field(cells[i]);
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out.str();
}

namespace {

std::vector<std::string> metric_cells(double acc, double p, double r, double f1) {
  return {format_metric(acc), format_metric(p), format_metric(r), format_metric(f1)};
}

}  // namespace

Table attempt_table(std::string title, std::span<const MetricsReport> sentence_runs,
                    std::span<const MetricsReport> study_runs) {
  Table t;
  t.title = std::move(title);
  t.header = {"Attempt", "Configuration", "Accuracy", "Precision", "Recall", "F1-score"};
  const std::size_t n = std::max(sentence_runs.size(), study_runs.size());
  auto add = [&](const std::string& attempt, const char* level, const std::vector<std::string>& m) {
    std::vector<std::string> row = {attempt, level};
    row.insert(row.end(), m.begin(), m.end());
    t.rows.push_back(std::move(row));
  };
  for (std::size_t i = 0; i < n; ++i) {
    const std::string attempt = std::to_string(i + 1);
    if (i < sentence_runs.size()) {
      const auto& r = sentence_runs[i];
      add(attempt, "Sentence", metric_cells(r.accuracy, r.precision, r.recall, r.f1));
    }
    if (i < study_runs.size()) {
      const auto& r = study_runs[i];
      add(attempt, "Study", metric_cells(r.accuracy, r.precision, r.recall, r.f1));
    }
  }
  if (!sentence_runs.empty()) {
    const auto a = average_runs(sentence_runs);
    add("AVG", "Sentence", metric_cells(a.accuracy, a.precision, a.recall, a.f1));
  }
  if (!study_runs.empty()) {
    const auto a = average_runs(study_runs);
    add("AVG", "Study", metric_cells(a.accuracy, a.precision, a.recall, a.f1));
  }
  return t;
}

Table mil_table(std::string title, std::span<const GridEntry> entries) {
  Table t;
  t.title = std::move(title);
  t.header = {"Model", "SpaCy Config", "Accuracy", "Precision", "Recall", "F1-score"};
  for (const auto& e : entries) {
    std::vector<std::string> row = {e.model, e.enricher};
    const auto m = metric_cells(e.averaged.accuracy, e.averaged.precision, e.averaged.recall, e.averaged.f1);
    row.insert(row.end(), m.begin(), m.end());
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string display_backbone(std::string_view id) {
  if (id == "bert") return "BERT";
  if (id == "scibert") return "SciBERT";
  if (id == "biobert") return "BioBERT";
  return std::string(id);
}

std::string display_enricher(std::string_view id) {
  if (id == "sci_sm") return "en_core_sci_sm";
  if (id == "sci_md") return "en_core_sci_md";
  if (id == "sci_scibert") return "en_core_sci_scibert";
  return std::string(id);
}

}  // namespace eq5d
