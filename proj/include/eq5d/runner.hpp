// SPDX-License-Identifier: Apache-2.0
#pragma once
// Experiment orchestration: one cell is (backbone, enricher, approach) trained
// and evaluated once per run seed. Every cell writes only below
// <output>/cells/<cell id>/; enrichment results are shared through a cache
// keyed by corpus content, enricher id and pipeline version.
//
// Layout of a cell directory:
//   cell.json                 declared configuration and its hash
//   results.jsonl             one record per (run, level)
//   runs/seed-<s>/manifest.json, split.json, metrics.json, predictions files
//   runs/seed-<s>/best/       checkpoint of the restored best epoch

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eq5d/backbone.hpp"
#include "eq5d/classifier.hpp"
#include "eq5d/corpus.hpp"
#include "eq5d/enrichment.hpp"
#include "eq5d/evaluation.hpp"

namespace eq5d {

enum class Approach { sentence_agg, mil, nb_bow };
std::string_view to_string(Approach a);
Approach parse_approach(std::string_view s);

/// The five fixed run seeds used when none are given.
std::vector<std::uint64_t> default_run_seeds();

struct ExperimentConfig {
  std::string backbone_id = "bert";
  std::string enricher_id = "sci_md";
  Approach approach = Approach::sentence_agg;
  TrainConfig train;
  /// Learning rates tried per run (selection on validation F1). Empty means
  /// train.learning_rate only.
  std::vector<double> lr_grid;
  std::vector<std::uint64_t> run_seeds = default_run_seeds();
  /// When set, every run uses split_seed and only training randomness varies.
  bool freeze_split = false;
  std::uint64_t split_seed = 0;
  double nb_alpha = 1.0;
  std::filesystem::path corpus_path;
  std::filesystem::path output_dir;

  /// Everything that determines results (output_dir excluded).
  nlohmann::json declared() const;
  std::string config_hash() const;
  /// Readable and unique: "<backbone>.<enricher>.<approach>-<hash8>".
  std::string cell_id() const;
  std::filesystem::path cell_dir() const { return output_dir / "cells" / cell_id(); }
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct RunnerContext {
  BackboneRegistry backbones;
  EnricherRegistry enrichers;
  std::filesystem::path cache_dir;  // empty → <output>/cache
  bool force = false;
  bool deterministic = true;

  /// Bindings from `bindings_path`; cache dir from $EQ5D_CACHE_DIR if set.
  static RunnerContext load(const std::filesystem::path& bindings_path);

  std::map<std::string, Backbone> pretrained_cache;
};

/// Enriches `records` or reads them back from the cache.
std::vector<EnrichedSentence> enrich_cached(std::span<const StudyRecord> records, const std::string& corpus_key,
                                            EnricherBackend& backend, const std::filesystem::path& cache_dir);

struct RunOutcome {
  std::string run_id;
  std::uint64_t seed = 0;
  std::vector<MetricsReport> reports;
  double chosen_lr = 0.0;
  bool cached = false;
  std::filesystem::path run_dir;
};

struct CellOutcome {
  ExperimentConfig config;
  std::vector<RunOutcome> runs;
};

/// Runs every seed of one cell. A run whose manifest carries the same config
/// hash and whose metrics exist is reused unless the context forces retraining.
CellOutcome run_cell(const ExperimentConfig& config, RunnerContext& ctx);

struct MatrixSpec {
  std::filesystem::path corpus_path;
  std::filesystem::path output_dir;
  std::vector<std::string> backbones = {"bert", "scibert", "biobert"};
  std::vector<std::string> enrichers = {"sci_sm", "sci_md", "sci_scibert"};
  std::vector<Approach> approaches = {Approach::sentence_agg, Approach::mil};
  bool include_baseline = false;
  TrainConfig train;
  std::vector<double> lr_grid;
  std::vector<std::uint64_t> run_seeds = default_run_seeds();
  bool freeze_split = false;
  std::uint64_t split_seed = 0;

  std::vector<ExperimentConfig> cells() const;
};

MatrixSpec matrix_spec_from_json(const nlohmann::json& j);

struct MatrixOutcome {
  std::vector<CellOutcome> completed;
  std::vector<std::pair<std::string, std::string>> failed;  // cell id, diagnostic
  bool ok() const { return failed.empty(); }
};

/// Runs every cell; a failing cell is recorded and the rest continue.
/// Writes <output>/matrix_summary.json.
MatrixOutcome run_matrix(const MatrixSpec& spec, RunnerContext& ctx);

struct ResultRecord {
  std::string config_id;
  std::string cell_id;
  std::string backbone_id;
  std::string enricher_id;
  Approach approach = Approach::sentence_agg;
  std::string run_id;
  std::uint64_t seed = 0;
  double chosen_lr = 0.0;
  std::string manifest;
  MetricsReport metrics;
};

nlohmann::json to_json(const ResultRecord& r);
ResultRecord result_from_json(const nlohmann::json& j);

/// Every results.jsonl below <output>/cells, ordered by cell id then run.
std::vector<ResultRecord> load_results(const std::filesystem::path& output_dir);

/// Markdown summary: per-cell attempt tables, the MIL grid, and the
/// comparison block (baseline, best study-level row per backbone, MIL rows).
/// Absent cells are omitted or shown as "n/a", never as zero.
std::string render_report(std::span<const ResultRecord> results);
/// Writes report.md plus one CSV per table under <output>/report/.
void write_report(const std::filesystem::path& output_dir, std::span<const ResultRecord> results);

}  // namespace eq5d
