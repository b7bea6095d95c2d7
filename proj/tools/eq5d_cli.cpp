// SPDX-License-Identifier: Apache-2.0
// eq5d command-line front end: enrich, train, evaluate, matrix, report, synth.

#include <cstdlib>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <spdlog/spdlog.h>

#include "eq5d/aggregation.hpp"
#include "eq5d/config.hpp"
#include "eq5d/error.hpp"
#include "eq5d/mil.hpp"
#include "eq5d/runner.hpp"
#include "eq5d/synthetic.hpp"

namespace fs = std::filesystem;
using namespace eq5d;

namespace {

struct TrainFlags {
  std::vector<double> lr;
  std::size_t max_epochs = 20;
  std::size_t patience = 5;
  std::size_t max_len = kDefaultMaxLen;
  std::size_t batch_size = 16;
  std::vector<std::uint64_t> seeds = default_run_seeds();
  bool freeze_split = false;
  std::uint64_t split_seed = 0;

  void attach(CLI::App* app) {
    app->add_option("--lr", lr, "learning rate, or a comma-separated grid selected on validation F1")->delimiter(',');
    app->add_option("--max-epochs", max_epochs)->capture_default_str();
    app->add_option("--patience", patience)->capture_default_str();
    app->add_option("--max-len", max_len)->capture_default_str();
    app->add_option("--batch-size", batch_size)->capture_default_str();
    app->add_option("--seeds", seeds, "comma-separated run seeds")->delimiter(',');
    app->add_flag("--freeze-split", freeze_split, "use --split-seed for every run instead of the run seed");
    app->add_option("--split-seed", split_seed)->capture_default_str();
  }

  TrainConfig config() const {
    TrainConfig c;
    if (lr.size() == 1) c.learning_rate = lr.front();
    c.max_epochs = max_epochs;
    c.patience = patience;
    c.max_len = max_len;
    c.batch_size = batch_size;
    return c;
  }

  std::vector<double> grid() const { return lr.size() > 1 ? lr : std::vector<double>{}; }
};

void print_reports(const CellOutcome& cell) {
  for (const auto& run : cell.runs)
    for (const auto& m : run.reports)
      std::cout << run.run_id << "  " << to_string(m.level) << "  acc " << format_metric(m.accuracy) << "  P "
                << format_metric(m.precision) << "  R " << format_metric(m.recall) << "  F1 " << format_metric(m.f1)
                << (run.cached ? "  (cached)" : "") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entity-enriched EQ-5D abstract screening"};
  app.require_subcommand(1);
  std::string bindings = default_bindings_path().string();
  std::string log_level = "info";
  bool deterministic = false;
  bool force = false;
  app.add_option("--bindings", bindings, "enricher/backbone bindings file")->capture_default_str();
  app.add_option("--log-level", log_level)->capture_default_str();
  app.add_flag("--deterministic", deterministic, "single-threaded linear algebra");
  app.add_flag("--force", force, "retrain runs even when cached results match");

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic corpus for smoke runs");
  std::string synth_out;
  SyntheticSpec sspec;
  synth->add_option("--output", synth_out)->required();
  synth->add_option("--studies", sspec.n_studies)->capture_default_str();
  synth->add_option("--positive-fraction", sspec.positive_fraction)->capture_default_str();
  synth->add_option("--min-sentences", sspec.min_sentences)->capture_default_str();
  synth->add_option("--max-sentences", sspec.max_sentences)->capture_default_str();
  synth->add_option("--seed", sspec.seed)->capture_default_str();

  // enrich
  auto* enrich = app.add_subcommand("enrich", "segment and entity-enrich a corpus");
  std::string corpus, enricher = "sci_md", output;
  enrich->add_option("--corpus", corpus)->required();
  enrich->add_option("--enricher", enricher)->capture_default_str();
  enrich->add_option("--output", output)->required();

  // train
  auto* train = app.add_subcommand("train", "train and evaluate one configuration over its run seeds");
  std::string backbone = "bert", approach = "sentence_agg";
  TrainFlags tflags;
  train->add_option("--corpus", corpus)->required();
  train->add_option("--backbone", backbone)->capture_default_str();
  train->add_option("--enricher", enricher)->capture_default_str();
  train->add_option("--approach", approach, "sentence_agg, mil or nb_bow")->capture_default_str();
  train->add_option("--output", output)->required();
  tflags.attach(train);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score a saved checkpoint on one partition of a corpus");
  std::string checkpoint, split_file, partition = "test";
  evaluate->add_option("--checkpoint", checkpoint, "a run's best/ directory")->required();
  evaluate->add_option("--corpus", corpus)->required();
  evaluate->add_option("--enricher", enricher)->capture_default_str();
  evaluate->add_option("--split", split_file, "split.json of the run")->required();
  evaluate->add_option("--partition", partition)->check(CLI::IsMember({"train", "val", "test"}))->capture_default_str();
  evaluate->add_option("--output", output)->required();

  // matrix
  auto* matrix = app.add_subcommand("matrix", "run the backbone x enricher x approach matrix");
  std::string spec_file;
  std::vector<std::string> backbones, enrichers, approaches;
  bool baseline = false;
  TrainFlags mflags;
  matrix->add_option("--spec", spec_file, "JSON matrix spec; flags below override it");
  matrix->add_option("--corpus", corpus);
  matrix->add_option("--output", output);
  matrix->add_option("--backbone", backbones)->delimiter(',');
  matrix->add_option("--enricher", enrichers)->delimiter(',');
  matrix->add_option("--approach", approaches)->delimiter(',');
  matrix->add_flag("--baseline", baseline, "add the Naive Bayes cell");
  mflags.attach(matrix);

  // report
  auto* report = app.add_subcommand("report", "render tables from a results directory");
  report->add_option("--output", output, "results directory")->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));
  if (deterministic) Eigen::setNbThreads(1);

  try {
    if (*synth) {
      write_corpus_jsonl(synth_out, synthetic_corpus(sspec));
      std::cout << "wrote " << sspec.n_studies << " studies to " << synth_out << '\n';
      return 0;
    }

    if (*report) {
      const auto results = load_results(output);
      write_report(output, results);
      std::cout << render_report(results);
      return 0;
    }

    RunnerContext ctx = RunnerContext::load(bindings);
    ctx.force = force;
    ctx.deterministic = deterministic;

    if (*enrich) {
      const auto loaded = load_corpus(corpus, guess_corpus_format(corpus));
      auto backend = ctx.enrichers.create(enricher);
      const auto sentences = enrich_corpus(loaded.records, *backend);
      save_enriched(output, sentences);
      std::cout << loaded.records.size() << " studies (" << loaded.dropped << " dropped), " << sentences.size()
                << " sentences, " << backend->version() << '\n';
      return 0;
    }

    if (*train) {
      ExperimentConfig cfg;
      cfg.backbone_id = backbone;
      cfg.enricher_id = enricher;
      cfg.approach = parse_approach(approach);
      cfg.train = tflags.config();
      cfg.train.backbone_id = backbone;
      cfg.lr_grid = tflags.grid();
      cfg.run_seeds = tflags.seeds;
      cfg.freeze_split = tflags.freeze_split;
      cfg.split_seed = tflags.split_seed;
      cfg.corpus_path = corpus;
      cfg.output_dir = output;
      print_reports(run_cell(cfg, ctx));
      return 0;
    }

    if (*evaluate) {
      auto [model, history] = load_checkpoint(checkpoint);
      const auto records = load_corpus(corpus, guess_corpus_format(corpus)).records;
      const DatasetSplit split = load_split(split_file);
      const auto& ids = partition == "train" ? split.train_ids : partition == "val" ? split.val_ids : split.test_ids;
      const auto chosen = select_records(records, ids);
      auto backend = ctx.enrichers.create(enricher);
      const auto sentences = enrich_corpus(chosen, *backend);
      const auto enc = encode(sentences, model.tokenizer(), model.config.max_len);
      std::vector<MetricsReport> reports;
      if (model.network->has_attention_pool()) {
        std::vector<BagPrediction> preds;
        std::vector<LabeledPrediction> items;
        for (const auto& b : make_bags(enc, model.config.max_bag)) {
          preds.push_back(mil_predict(model, b));
          items.push_back({b.label, preds.back().predicted_label});
        }
        save_bag_predictions(fs::path(output) / "bag_predictions.jsonl", preds);
        reports.push_back(compute_metrics(items, Level::bag));
      } else {
        const auto preds = predict_sentences(model, enc);
        const auto studies = aggregate_corpus(preds);
        save_predictions(fs::path(output) / "predictions.jsonl", preds);
        save_study_predictions(fs::path(output) / "study_predictions.jsonl", studies);
        reports.push_back(compute_metrics(join_sentence_golds(preds, sentences), Level::sentence));
        reports.push_back(compute_metrics(join_study_golds(studies, chosen), Level::study));
      }
      nlohmann::json j = nlohmann::json::array();
      for (const auto& r : reports) {
        j.push_back(to_json(r));
        std::cout << to_string(r.level) << "  acc " << format_metric(r.accuracy) << "  P " << format_metric(r.precision)
                  << "  R " << format_metric(r.recall) << "  F1 " << format_metric(r.f1) << '\n';
      }
      write_json_file(fs::path(output) / "metrics.json", j);
      return 0;
    }

    if (*matrix) {
      MatrixSpec spec = spec_file.empty() ? MatrixSpec{} : matrix_spec_from_json(read_json_file(spec_file));
      if (!corpus.empty()) spec.corpus_path = corpus;
      if (!output.empty()) spec.output_dir = output;
      if (spec.corpus_path.empty() || spec.output_dir.empty()) throw ConfigError("matrix needs --corpus and --output");
      if (!backbones.empty()) spec.backbones = backbones;
      if (!enrichers.empty()) spec.enrichers = enrichers;
      if (!approaches.empty()) {
        spec.approaches.clear();
        for (const auto& a : approaches) spec.approaches.push_back(parse_approach(a));
      }
      if (baseline) spec.include_baseline = true;
      if (!matrix->get_option("--lr")->empty()) {
        spec.train.learning_rate = mflags.config().learning_rate;
        spec.lr_grid = mflags.grid();
      }
      if (!matrix->get_option("--max-epochs")->empty()) spec.train.max_epochs = mflags.max_epochs;
      if (!matrix->get_option("--patience")->empty()) spec.train.patience = mflags.patience;
      if (!matrix->get_option("--max-len")->empty()) spec.train.max_len = mflags.max_len;
      if (!matrix->get_option("--batch-size")->empty()) spec.train.batch_size = mflags.batch_size;
      if (!matrix->get_option("--seeds")->empty()) spec.run_seeds = mflags.seeds;
      if (mflags.freeze_split) spec.freeze_split = true;
      if (!matrix->get_option("--split-seed")->empty()) spec.split_seed = mflags.split_seed;

      const MatrixOutcome outcome = run_matrix(spec, ctx);
      for (const auto& c : outcome.completed) print_reports(c);
      for (const auto& [cell, err] : outcome.failed) std::cerr << "FAILED " << cell << ": " << err << '\n';
      std::cout << outcome.completed.size() << " cells completed, " << outcome.failed.size() << " failed\n";
      return outcome.ok() ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
