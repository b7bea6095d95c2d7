// SPDX-License-Identifier: Apache-2.0
#include "eq5d/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "eq5d/aggregation.hpp"
#include "eq5d/baselines.hpp"
#include "eq5d/config.hpp"
#include "eq5d/encoding.hpp"
#include "eq5d/error.hpp"
#include "eq5d/mil.hpp"
#include "eq5d/rng.hpp"

namespace eq5d {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IngestionError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_jsonl(const fs::path& path, const std::vector<nlohmann::json>& rows) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write " + tmp.string());
    for (const auto& r : rows) out << r.dump() << '\n';
  }
  fs::rename(tmp, path);
}

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<nlohmann::json> rows;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(nlohmann::json::parse(line));
  return rows;
}

std::vector<EnrichedSentence> sentences_of(std::span<const EnrichedSentence> all, std::span<const std::string> ids) {
  const std::set<std::string> keep(ids.begin(), ids.end());
  std::vector<EnrichedSentence> out;
  for (const auto& s : all)
    if (keep.count(s.study_id)) out.push_back(s);
  return out;
}

LoadedCorpus read_corpus(const fs::path& path) { return load_corpus(path, guess_corpus_format(path)); }

}  // namespace

std::string_view to_string(Approach a) {
  switch (a) {
    case Approach::sentence_agg: return "sentence_agg";
    case Approach::mil: return "mil";
    case Approach::nb_bow: return "nb_bow";
  }
  return "?";
}

Approach parse_approach(std::string_view s) {
  if (s == "sentence_agg") return Approach::sentence_agg;
  if (s == "mil") return Approach::mil;
  if (s == "nb_bow") return Approach::nb_bow;
  throw ConfigError("unknown approach '" + std::string(s) + "' (sentence_agg, mil, nb_bow)");
}

std::vector<std::uint64_t> default_run_seeds() { return {11, 23, 37, 41, 53}; }

nlohmann::json ExperimentConfig::declared() const {
  nlohmann::json j = {{"approach", to_string(approach)},
                      {"run_seeds", run_seeds},
                      {"freeze_split", freeze_split},
                      {"split_seed", split_seed},
                      {"corpus_path", corpus_path.string()}};
  if (approach == Approach::nb_bow) {
    j["nb_alpha"] = nb_alpha;
  } else {
    TrainConfig t = train;
    t.backbone_id = backbone_id;
    t.seed = 0;  // per run
    j["backbone_id"] = backbone_id;
    j["enricher_id"] = enricher_id;
    j["train"] = to_json(t);
    j["lr_grid"] = lr_grid;
  }
  return j;
}

std::string ExperimentConfig::config_hash() const { return hex64(fnv1a64(declared().dump())); }

std::string ExperimentConfig::cell_id() const {
  const std::string h = config_hash().substr(0, 8);
  if (approach == Approach::nb_bow) return "baseline.nb_bow-" + h;
  return backbone_id + "." + enricher_id + "." + std::string(to_string(approach)) + "-" + h;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.approach = parse_approach(j.value("approach", std::string("sentence_agg")));
  c.backbone_id = j.value("backbone_id", c.backbone_id);
  c.enricher_id = j.value("enricher_id", c.enricher_id);
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  c.train.backbone_id = c.backbone_id;
  c.lr_grid = j.value("lr_grid", std::vector<double>{});
  c.run_seeds = j.value("run_seeds", default_run_seeds());
  c.freeze_split = j.value("freeze_split", false);
  c.split_seed = j.value("split_seed", std::uint64_t{0});
  c.nb_alpha = j.value("nb_alpha", 1.0);
  c.corpus_path = j.value("corpus_path", std::string{});
  c.output_dir = j.value("output_dir", std::string{});
  return c;
}

RunnerContext RunnerContext::load(const fs::path& bindings_path) {
  const auto j = read_json_file(bindings_path);
  RunnerContext ctx;
  ctx.backbones = BackboneRegistry::from_json(j);
  ctx.enrichers = EnricherRegistry::from_json(j);
  if (const char* c = std::getenv("EQ5D_CACHE_DIR"); c && *c) ctx.cache_dir = c;
  return ctx;
}

std::vector<EnrichedSentence> enrich_cached(std::span<const StudyRecord> records, const std::string& corpus_key,
                                            EnricherBackend& backend, const fs::path& cache_dir) {
  const std::string version_key = hex64(fnv1a64(backend.version())).substr(0, 12);
  const fs::path path = cache_dir / "enriched" / (corpus_key + "." + backend.id() + "." + version_key + ".jsonl");
  if (fs::exists(path)) {
    spdlog::info("enrichment cache hit: {}", path.string());
    return load_enriched(path);
  }
  auto sentences = enrich_corpus(records, backend);
  save_enriched(path, sentences);
  return sentences;
}

namespace {

struct CellData {
  std::vector<StudyRecord> records;
  std::string corpus_key;
  std::vector<EnrichedSentence> sentences;
  std::string enricher_version;
};

template <class Train>
auto select_over_grid(const std::vector<double>& grid, double fallback, Train&& train, nlohmann::json& scores) {
  const std::vector<double> rates = grid.empty() ? std::vector<double>{fallback} : grid;
  using Result = decltype(train(0.0));
  std::optional<Result> best;
  double best_lr = 0.0;
  std::string last_error;
  scores = nlohmann::json::array();
  for (double lr : rates) {
    try {
      Result r = train(lr);
      const double f1 = r.second.best_val_f1;
      scores.push_back({{"learning_rate", lr}, {"best_val_f1", f1}});
      if (!best || f1 > best->second.best_val_f1 || (f1 == best->second.best_val_f1 && lr < best_lr)) {
        best = std::move(r);
        best_lr = lr;
      }
    } catch (const TrainingDiverged& e) {
      spdlog::warn("learning rate {} diverged: {}", lr, e.what());
      scores.push_back({{"learning_rate", lr}, {"diverged", e.what()}});
      last_error = e.what();
    }
  }
  if (!best) throw TrainingDiverged("every learning rate diverged; last: " + last_error);
  return std::make_pair(std::move(*best), best_lr);
}

RunOutcome run_single(const ExperimentConfig& cfg, std::uint64_t seed, RunnerContext& ctx, const CellData& data) {
  RunOutcome out;
  out.seed = seed;
  out.run_id = cfg.cell_id() + "/seed-" + std::to_string(seed);
  out.run_dir = cfg.cell_dir() / "runs" / ("seed-" + std::to_string(seed));
  const std::string hash = cfg.config_hash();

  const fs::path manifest_path = out.run_dir / "manifest.json";
  const fs::path metrics_path = out.run_dir / "metrics.json";
  if (!ctx.force && fs::exists(manifest_path) && fs::exists(metrics_path)) {
    const auto manifest = read_json_file(manifest_path);
    if (manifest.value("config_hash", std::string{}) == hash) {
      for (const auto& m : read_json_file(metrics_path)) out.reports.push_back(metrics_from_json(m));
      out.chosen_lr = manifest.value("chosen_learning_rate", 0.0);
      out.cached = true;
      spdlog::info("{}: cached, skipping", out.run_id);
      return out;
    }
  }
  if (fs::exists(out.run_dir)) fs::remove_all(out.run_dir);
  fs::create_directories(out.run_dir);

  nlohmann::json manifest = {{"config_hash", hash},
                             {"cell_id", cfg.cell_id()},
                             {"run_id", out.run_id},
                             {"seed", seed},
                             {"declared", cfg.declared()},
                             {"started", utc_now()},
                             {"deterministic", ctx.deterministic}};

  const std::uint64_t split_seed = cfg.freeze_split ? cfg.split_seed : seed;
  const DatasetSplit split = split_corpus(data.records, split_seed);
  save_split(out.run_dir / "split.json", split);
  manifest["split"] = {{"file", "split.json"},
                       {"seed", split_seed},
                       {"hash", hex64(fnv1a64(split_to_json(split).dump()))},
                       {"sizes", {split.train_ids.size(), split.val_ids.size(), split.test_ids.size()}}};
  manifest["software"] = {{"eq5d", kVersion},
                          {"compiler", __VERSION__},
                          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                        "." + std::to_string(EIGEN_MINOR_VERSION)}};
  manifest["decisions"] = {{"tie_rule", "positive"}, {"tie_tolerance", kTieTolerance}};

  const auto test_records = select_records(data.records, split.test_ids);
  const std::string cid = hash;

  if (cfg.approach == Approach::nb_bow) {
    const auto train_records = select_records(data.records, split.train_ids);
    const BowModel model = bow_train(train_records, cfg.nb_alpha);
    write_json_file(out.run_dir / "nb_model.json", to_json(model));
    std::vector<nlohmann::json> rows;
    std::vector<LabeledPrediction> items;
    for (const auto& r : test_records) {
      const auto s = bow_predict(model, r.abstract);
      rows.push_back({{"study_id", r.study_id},
                      {"predicted_label", to_int(s.label)},
                      {"log_positive", s.log_positive},
                      {"log_negative", s.log_negative}});
      items.push_back({r.label, s.label});
    }
    write_jsonl(out.run_dir / "study_predictions.jsonl", rows);
    out.reports.push_back(compute_metrics(items, Level::study, out.run_id, cid));
    manifest["decisions"].update({{"nb_alpha", cfg.nb_alpha},
                                  {"nb_text", "abstract only"},
                                  {"nb_tokenizer", "lowercase, punctuation stripped, whitespace split"}});
  } else {
    const auto train_s = sentences_of(data.sentences, split.train_ids);
    const auto val_s = sentences_of(data.sentences, split.val_ids);
    const auto test_s = sentences_of(data.sentences, split.test_ids);

    Backbone backbone;
    if (ctx.backbones.is_pretrained(cfg.backbone_id)) {
      auto it = ctx.pretrained_cache.find(cfg.backbone_id);
      if (it == ctx.pretrained_cache.end())
        it = ctx.pretrained_cache.emplace(cfg.backbone_id, ctx.backbones.resolve(cfg.backbone_id)).first;
      backbone = it->second;
    } else {
      std::vector<std::string> texts;
      for (const auto& s : train_s) texts.push_back(s.enriched_text);
      backbone = ctx.backbones.resolve(cfg.backbone_id, texts);
    }
    const auto enc_train = encode(train_s, *backbone.tokenizer, cfg.train.max_len);
    const auto enc_val = encode(val_s, *backbone.tokenizer, cfg.train.max_len);
    const auto enc_test = encode(test_s, *backbone.tokenizer, cfg.train.max_len);

    TrainConfig tc = cfg.train;
    tc.backbone_id = cfg.backbone_id;
    tc.seed = seed;
    nlohmann::json grid_scores;
    TrainedModel model;
    TrainHistory history;

    if (cfg.approach == Approach::sentence_agg) {
      auto [result, lr] = select_over_grid(
          cfg.lr_grid, tc.learning_rate,
          [&](double rate) {
            TrainConfig c = tc;
            c.learning_rate = rate;
            return fine_tune(backbone, enc_train, enc_val, c);
          },
          grid_scores);
      model = std::move(result.first);
      history = std::move(result.second);
      out.chosen_lr = lr;
      const auto preds = predict_sentences(model, enc_test);
      save_predictions(out.run_dir / "predictions.jsonl", preds);
      const auto studies = aggregate_corpus(preds);
      save_study_predictions(out.run_dir / "study_predictions.jsonl", studies);
      out.reports.push_back(compute_metrics(join_sentence_golds(preds, test_s), Level::sentence, out.run_id, cid));
      out.reports.push_back(compute_metrics(join_study_golds(studies, test_records), Level::study, out.run_id, cid));
      manifest["decisions"].update({{"aggregation", "unweighted mean of sentence confidences"}});
    } else {
      const auto bags_train = make_bags(enc_train, tc.max_bag);
      const auto bags_val = make_bags(enc_val, tc.max_bag);
      const auto bags_test = make_bags(enc_test, tc.max_bag);
      auto [result, lr] = select_over_grid(
          cfg.lr_grid, tc.learning_rate,
          [&](double rate) {
            TrainConfig c = tc;
            c.learning_rate = rate;
            return mil_train(backbone, bags_train, bags_val, c);
          },
          grid_scores);
      model = std::move(result.first);
      history = std::move(result.second);
      out.chosen_lr = lr;
      std::vector<BagPrediction> preds;
      std::vector<LabeledPrediction> items;
      for (const auto& b : bags_test) {
        preds.push_back(mil_predict(model, b));
        items.push_back({b.label, preds.back().predicted_label});
      }
      save_bag_predictions(out.run_dir / "bag_predictions.jsonl", preds);
      out.reports.push_back(compute_metrics(items, Level::bag, out.run_id, cid));
      manifest["decisions"].update({{"attention_dim", tc.attention_dim},
                                    {"max_bag", tc.max_bag},
                                    {"bags_per_step", bags_per_batch(bags_train, tc.batch_size)},
                                    {"instance_representation", "pooled first token"}});
    }
    save_checkpoint(out.run_dir / "best", model, history);
    manifest["chosen_learning_rate"] = out.chosen_lr;
    manifest["lr_grid_scores"] = grid_scores;
    manifest["training"] = {{"best_epoch", history.best_epoch},
                            {"best_val_f1", history.best_val_f1},
                            {"stop_reason", to_string(history.stop_reason)},
                            {"epochs_run", history.epochs.size()},
                            {"warmup_steps", history.warmup_steps},
                            {"total_steps", history.total_steps}};
    manifest["software"]["enricher"] = {{"id", cfg.enricher_id}, {"version", data.enricher_version}};
    manifest["software"]["backbone"] = {{"id", backbone.id},
                                        {"checkpoint", backbone.checkpoint},
                                        {"tokenizer", backbone.tokenizer->id()}};
    manifest["decisions"].update({{"truncation", "head (first max_len - 2 word pieces kept)"},
                                  {"max_len", tc.max_len},
                                  {"weight_decay", tc.weight_decay},
                                  {"grad_clip_norm", tc.clip_norm},
                                  {"head", "linear over pooled first token, 2 outputs"},
                                  {"dropout", 0.0},
                                  {"loss", "unweighted cross-entropy"},
                                  {"overrides", tc.overrides()}});
  }

  nlohmann::json metrics = nlohmann::json::array();
  for (const auto& r : out.reports) metrics.push_back(to_json(r));
  write_json_file(metrics_path, metrics);
  manifest["finished"] = utc_now();
  write_json_file(manifest_path, manifest);
  return out;
}

}  // namespace

CellOutcome run_cell(const ExperimentConfig& config, RunnerContext& ctx) {
  if (config.run_seeds.empty()) throw ConfigError("cell " + config.cell_id() + " has no run seeds");
  if (config.output_dir.empty()) throw ConfigError("no output directory");
  const fs::path cell_dir = config.cell_dir();
  fs::create_directories(cell_dir);
  write_json_file(cell_dir / "cell.json", {{"cell_id", config.cell_id()},
                                           {"config_hash", config.config_hash()},
                                           {"declared", config.declared()}});

  CellData data;
  const std::string bytes = read_file(config.corpus_path);
  data.corpus_key = hex64(fnv1a64(bytes)).substr(0, 12);
  data.records = read_corpus(config.corpus_path).records;
  if (config.approach != Approach::nb_bow) {
    auto backend = ctx.enrichers.create(config.enricher_id);
    data.enricher_version = backend->version();
    const fs::path cache = ctx.cache_dir.empty() ? config.output_dir / "cache" : ctx.cache_dir;
    data.sentences = enrich_cached(data.records, data.corpus_key, *backend, cache);
  }

  CellOutcome outcome;
  outcome.config = config;
  std::vector<nlohmann::json> rows;
  for (std::uint64_t seed : config.run_seeds) {
    spdlog::info("{}: seed {}", config.cell_id(), seed);
    RunOutcome run = run_single(config, seed, ctx, data);
    for (const auto& m : run.reports) {
      ResultRecord r;
      r.config_id = config.config_hash();
      r.cell_id = config.cell_id();
      r.backbone_id = config.approach == Approach::nb_bow ? "" : config.backbone_id;
      r.enricher_id = config.approach == Approach::nb_bow ? "" : config.enricher_id;
      r.approach = config.approach;
      r.run_id = run.run_id;
      r.seed = seed;
      r.chosen_lr = run.chosen_lr;
      r.manifest = fs::relative(run.run_dir / "manifest.json", config.output_dir).string();
      r.metrics = m;
      rows.push_back(to_json(r));
    }
    outcome.runs.push_back(std::move(run));
  }
  write_jsonl(cell_dir / "results.jsonl", rows);
  return outcome;
}

std::vector<ExperimentConfig> MatrixSpec::cells() const {
  std::vector<ExperimentConfig> out;
  auto base = [&] {
    ExperimentConfig c;
    c.train = train;
    c.lr_grid = lr_grid;
    c.run_seeds = run_seeds;
    c.freeze_split = freeze_split;
    c.split_seed = split_seed;
    c.corpus_path = corpus_path;
    c.output_dir = output_dir;
    return c;
  };
  for (const auto a : approaches) {
    if (a == Approach::nb_bow) continue;
    for (const auto& b : backbones) {
      for (const auto& e : enrichers) {
        ExperimentConfig c = base();
        c.approach = a;
        c.backbone_id = b;
        c.enricher_id = e;
        c.train.backbone_id = b;
        out.push_back(std::move(c));
      }
    }
  }
  const bool nb_listed = std::find(approaches.begin(), approaches.end(), Approach::nb_bow) != approaches.end();
  if (include_baseline || nb_listed) {
    ExperimentConfig c = base();
    c.approach = Approach::nb_bow;
    out.push_back(std::move(c));
  }
  return out;
}

MatrixSpec matrix_spec_from_json(const nlohmann::json& j) {
  MatrixSpec s;
  s.corpus_path = j.value("corpus", std::string{});
  s.output_dir = j.value("output", std::string{});
  s.backbones = j.value("backbones", s.backbones);
  s.enrichers = j.value("enrichers", s.enrichers);
  if (j.contains("approaches")) {
    s.approaches.clear();
    for (const auto& a : j.at("approaches")) s.approaches.push_back(parse_approach(a.get<std::string>()));
  }
  s.include_baseline = j.value("include_baseline", false);
  if (j.contains("train")) s.train = train_config_from_json(j.at("train"));
  s.lr_grid = j.value("lr_grid", std::vector<double>{});
  s.run_seeds = j.value("seeds", s.run_seeds);
  s.freeze_split = j.value("freeze_split", false);
  s.split_seed = j.value("split_seed", std::uint64_t{0});
  return s;
}

MatrixOutcome run_matrix(const MatrixSpec& spec, RunnerContext& ctx) {
  MatrixOutcome outcome;
  nlohmann::json failed = nlohmann::json::array(), completed = nlohmann::json::array();
  for (const auto& cell : spec.cells()) {
    try {
      outcome.completed.push_back(run_cell(cell, ctx));
      completed.push_back(cell.cell_id());
    } catch (const std::exception& e) {
      spdlog::error("cell {} failed: {}", cell.cell_id(), e.what());
      outcome.failed.emplace_back(cell.cell_id(), e.what());
      failed.push_back({{"cell_id", cell.cell_id()}, {"error", e.what()}});
    }
  }
  write_json_file(spec.output_dir / "matrix_summary.json",
                  {{"finished", utc_now()}, {"completed", completed}, {"failed", failed}});
  return outcome;
}

nlohmann::json to_json(const ResultRecord& r) {
  return {{"config_id", r.config_id}, {"cell_id", r.cell_id},   {"backbone_id", r.backbone_id},
          {"enricher_id", r.enricher_id}, {"approach", to_string(r.approach)}, {"run_id", r.run_id},
          {"seed", r.seed},           {"chosen_lr", r.chosen_lr}, {"manifest", r.manifest},
          {"metrics", to_json(r.metrics)}};
}

ResultRecord result_from_json(const nlohmann::json& j) {
  ResultRecord r;
  r.config_id = j.at("config_id").get<std::string>();
  r.cell_id = j.at("cell_id").get<std::string>();
  r.backbone_id = j.value("backbone_id", std::string{});
  r.enricher_id = j.value("enricher_id", std::string{});
  r.approach = parse_approach(j.at("approach").get<std::string>());
  r.run_id = j.at("run_id").get<std::string>();
  r.seed = j.value("seed", std::uint64_t{0});
  r.chosen_lr = j.value("chosen_lr", 0.0);
  r.manifest = j.value("manifest", std::string{});
  r.metrics = metrics_from_json(j.at("metrics"));
  return r;
}

std::vector<ResultRecord> load_results(const fs::path& output_dir) {
  std::vector<fs::path> files;
  const fs::path cells = output_dir / "cells";
  if (fs::exists(cells))
    for (const auto& e : fs::directory_iterator(cells))
      if (fs::exists(e.path() / "results.jsonl")) files.push_back(e.path() / "results.jsonl");
  std::sort(files.begin(), files.end());
  std::vector<ResultRecord> out;
  for (const auto& f : files)
    for (const auto& row : read_jsonl(f)) out.push_back(result_from_json(row));
  return out;
}

namespace {

struct CellView {
  std::string cell_id;
  std::string backbone;
  std::string enricher;
  Approach approach = Approach::sentence_agg;
  std::vector<MetricsReport> sentence, study, bag;
};

std::vector<CellView> group_cells(std::span<const ResultRecord> results) {
  std::map<std::string, CellView> by_id;
  for (const auto& r : results) {
    auto& c = by_id[r.cell_id];
    c.cell_id = r.cell_id;
    c.backbone = r.backbone_id;
    c.enricher = r.enricher_id;
    c.approach = r.approach;
    switch (r.metrics.level) {
      case Level::sentence: c.sentence.push_back(r.metrics); break;
      case Level::study: c.study.push_back(r.metrics); break;
      case Level::bag: c.bag.push_back(r.metrics); break;
    }
  }
  std::vector<CellView> out;
  for (auto& [id, c] : by_id) out.push_back(std::move(c));
  return out;
}

int backbone_rank(const std::string& id) {
  if (id == "bert") return 0;
  if (id == "scibert") return 1;
  if (id == "biobert") return 2;
  return 3;
}

int enricher_rank(const std::string& id) {
  if (id == "sci_sm") return 0;
  if (id == "sci_md") return 1;
  if (id == "sci_scibert") return 2;
  return 3;
}

bool cell_order(const CellView& a, const CellView& b) {
  return std::tuple(backbone_rank(a.backbone), a.backbone, enricher_rank(a.enricher), a.enricher, a.cell_id) <
         std::tuple(backbone_rank(b.backbone), b.backbone, enricher_rank(b.enricher), b.enricher, b.cell_id);
}

std::vector<std::string> avg_row(std::string name, std::string config, const AveragedReport& a) {
  return {std::move(name), std::move(config), format_metric(a.accuracy), format_metric(a.precision),
          format_metric(a.recall), format_metric(a.f1)};
}

struct ReportTables {
  std::vector<std::pair<std::string, Table>> tables;  // file stem, table
};

ReportTables build_tables(std::span<const ResultRecord> results) {
  ReportTables out;
  auto cells = group_cells(results);
  std::sort(cells.begin(), cells.end(), cell_order);

  for (const auto& c : cells) {
    if (c.approach != Approach::sentence_agg) continue;
    const std::string title = display_backbone(c.backbone) + " with " + display_enricher(c.enricher) +
                              " enrichment, sentence classification + aggregation (" + c.cell_id + ")";
    out.tables.emplace_back(c.cell_id, attempt_table(title, c.sentence, c.study));
  }

  std::vector<GridEntry> grid;
  for (const auto& c : cells)
    if (c.approach == Approach::mil && !c.bag.empty())
      grid.push_back({display_backbone(c.backbone), display_enricher(c.enricher), average_runs(c.bag)});
  if (!grid.empty()) out.tables.emplace_back("mil_grid", mil_table("MIL with entity-enriched sentences (bag level, AVG)", grid));

  Table cmp;
  cmp.title = "Summary comparison (AVG across runs)";
  cmp.header = {"Model", "Configuration", "Accuracy", "Precision", "Recall", "F1-score"};
  for (const auto& c : cells)
    if (c.approach == Approach::nb_bow && !c.study.empty())
      cmp.rows.push_back(avg_row("Naive Bayes (BoW)", "abstract, study level", average_runs(c.study)));
  auto best_per_backbone = [&](Approach a, auto&& pick) {
    std::map<std::string, std::pair<const CellView*, AveragedReport>> best;
    for (const auto& c : cells) {
      if (c.approach != a) continue;
      const auto& runs = pick(c);
      if (runs.empty()) continue;
      AveragedReport avg = average_runs(runs);
      auto it = best.find(c.backbone);
      if (it == best.end() || avg.f1 > it->second.second.f1) best[c.backbone] = {&c, std::move(avg)};
    }
    std::vector<std::pair<const CellView*, AveragedReport>> rows;
    for (auto& [k, v] : best) rows.push_back(v);
    std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return cell_order(*x.first, *y.first); });
    return rows;
  };
  for (const auto& [c, avg] : best_per_backbone(Approach::sentence_agg, [](const CellView& v) -> const auto& { return v.study; }))
    cmp.rows.push_back(avg_row(display_backbone(c->backbone), display_enricher(c->enricher) + ", study level", avg));
  for (const auto& [c, avg] : best_per_backbone(Approach::mil, [](const CellView& v) -> const auto& { return v.bag; }))
    cmp.rows.push_back(avg_row(display_backbone(c->backbone) + " + MIL", display_enricher(c->enricher) + ", bag level", avg));
  if (!cmp.rows.empty()) out.tables.emplace_back("comparison", std::move(cmp));
  return out;
}

}  // namespace

std::string render_report(std::span<const ResultRecord> results) {
  std::ostringstream out;
  out << "# Results\n\n";
  if (results.empty()) {
    out << "No results recorded.\n";
    return out.str();
  }
  const auto t = build_tables(results);
  for (const auto& [stem, table] : t.tables) out << table.to_markdown() << '\n';
  return out.str();
}

void write_report(const fs::path& output_dir, std::span<const ResultRecord> results) {
  const fs::path dir = output_dir / "report";
  fs::create_directories(dir);
  std::ofstream(dir / "report.md") << render_report(results);
  if (results.empty()) return;
  for (const auto& [stem, table] : build_tables(results).tables) std::ofstream(dir / (stem + ".csv")) << table.to_csv();
}

}  // namespace eq5d
