// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "eq5d/aggregation.hpp"
#include "eq5d/corpus.hpp"
#include "eq5d/enrichment.hpp"

namespace eq5d {

enum class Level { sentence, study, bag };

std::string_view to_string(Level level);
Level parse_level(std::string_view s);

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const Confusion&) const = default;
};

/// Binary metrics with label 1 as the positive class. An undefined precision
/// (no positive predictions) or recall (no positive golds) is reported as 0
/// and flagged.
struct MetricsReport {
  Level level = Level::sentence;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<Confusion> counts;  // absent for reports built from published values
  bool precision_undefined = false;
  bool recall_undefined = false;
  std::string run_id;
  std::string config_id;
};

struct LabeledPrediction {
  Label gold = Label::negative;
  Label predicted = Label::negative;
};

MetricsReport metrics_from_counts(const Confusion& c, Level level, std::string run_id = {}, std::string config_id = {});
/// Throws ValidationError on empty input.
MetricsReport compute_metrics(std::span<const LabeledPrediction> items, Level level, std::string run_id = {},
                              std::string config_id = {});
MetricsReport metrics_from_values(double accuracy, double precision, double recall, double f1, Level level,
                                  std::string run_id = {}, std::string config_id = {});

struct AveragedReport {
  Level level = Level::sentence;
  std::string config_id;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_runs = 0;
  std::vector<MetricsReport> runs;
};

/// Unweighted means. Throws ValidationError for an empty list or mixed
/// config ids / levels.
AveragedReport average_runs(std::span<const MetricsReport> reports);

/// Two-decimal rendering used in every table.
std::string format_metric(double v);

nlohmann::json to_json(const MetricsReport& r);
MetricsReport metrics_from_json(const nlohmann::json& j);

/// Joins sentence predictions with their gold (inherited) labels. Throws
/// ValidationError if a prediction has no matching sentence.
std::vector<LabeledPrediction> join_sentence_golds(std::span<const PredictionRecord> preds,
                                                   std::span<const EnrichedSentence> golds);
/// Joins study predictions with corpus labels.
std::vector<LabeledPrediction> join_study_golds(std::span<const StudyPrediction> preds,
                                                std::span<const StudyRecord> golds);

/// A rectangular text table rendered as Markdown or CSV.
struct Table {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_markdown() const;
  std::string to_csv() const;
};

/// Per-attempt layout: for every attempt a Sentence and a Study row, then the
/// AVG rows. Either list may be empty.
Table attempt_table(std::string title, std::span<const MetricsReport> sentence_runs,
                    std::span<const MetricsReport> study_runs);

struct GridEntry {
  std::string model;
  std::string enricher;
  AveragedReport averaged;
};

/// Model x enrichment grid of averaged bag-level metrics.
Table mil_table(std::string title, std::span<const GridEntry> entries);

/// Display names: bert → BERT, sci_md → en_core_sci_md, ... (unknown ids pass through).
std::string display_backbone(std::string_view id);
std::string display_enricher(std::string_view id);

}  // namespace eq5d
