// SPDX-License-Identifier: Apache-2.0
#include "eq5d/classifier.hpp"

#include <cmath>
#include <set>

#include <spdlog/spdlog.h>

#include "eq5d/config.hpp"
#include "eq5d/error.hpp"
#include "eq5d/evaluation.hpp"
#include "eq5d/optim.hpp"
#include "eq5d/rng.hpp"
#include "eq5d/safetensors.hpp"

namespace eq5d {

std::vector<double> default_lr_grid() { return {2e-5, 5e-6, 2e-6, 1e-6}; }

std::vector<std::string> TrainConfig::overrides() const {
  const TrainConfig d;
  std::vector<std::string> out;
  const nlohmann::json mine = to_json(*this);
  const nlohmann::json ref = to_json(d);
  for (const auto& [key, value] : mine.items()) {
    if (key == "backbone_id" || key == "seed") continue;
    if (value != ref.at(key)) out.push_back(key);
  }
  return out;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"backbone_id", c.backbone_id},     {"learning_rate", c.learning_rate},
          {"max_epochs", c.max_epochs},       {"warmup_fraction", c.warmup_fraction},
          {"patience", c.patience},           {"adam_epsilon", c.adam_epsilon},
          {"max_len", c.max_len},             {"batch_size", c.batch_size},
          {"seed", c.seed},                   {"weight_decay", c.weight_decay},
          {"clip_norm", c.clip_norm},         {"attention_dim", c.attention_dim},
          {"max_bag", c.max_bag}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.backbone_id = j.value("backbone_id", c.backbone_id);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
  c.patience = j.value("patience", c.patience);
  c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
  c.max_len = j.value("max_len", c.max_len);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.attention_dim = j.value("attention_dim", c.attention_dim);
  c.max_bag = j.value("max_bag", c.max_bag);
  if (c.max_epochs == 0 || c.batch_size == 0 || c.max_len < 2)
    throw ConfigError("train config: max_epochs, batch_size must be positive and max_len >= 2");
  return c;
}

std::string_view to_string(StopReason r) { return r == StopReason::early_stop ? "early_stop" : "max_epochs"; }

nlohmann::json to_json(const TrainHistory& h) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : h.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_f1", e.val_f1},
                      {"learning_rate", e.learning_rate},
                      {"weights_fingerprint", hex64(e.weights_fingerprint)}});
  return {{"epochs", epochs},           {"stop_reason", to_string(h.stop_reason)},
          {"best_epoch", h.best_epoch}, {"best_val_f1", h.best_val_f1},
          {"warmup_steps", h.warmup_steps}, {"total_steps", h.total_steps}};
}

TrainHistory train_history_from_json(const nlohmann::json& j) {
  TrainHistory h;
  for (const auto& e : j.at("epochs")) {
    EpochRecord r;
    r.epoch = e.at("epoch").get<std::size_t>();
    r.train_loss = e.at("train_loss").get<double>();
    r.val_f1 = e.at("val_f1").get<double>();
    r.learning_rate = e.at("learning_rate").get<double>();
    r.weights_fingerprint = std::stoull(e.at("weights_fingerprint").get<std::string>(), nullptr, 16);
    h.epochs.push_back(r);
  }
  h.stop_reason = j.at("stop_reason").get<std::string>() == "early_stop" ? StopReason::early_stop
                                                                         : StopReason::max_epochs;
  h.best_epoch = j.at("best_epoch").get<std::size_t>();
  h.best_val_f1 = j.at("best_val_f1").get<double>();
  h.warmup_steps = j.value("warmup_steps", std::size_t{0});
  h.total_steps = j.value("total_steps", std::size_t{0});
  return h;
}

ClassifierNetwork::ClassifierNetwork(const Backbone& backbone, std::uint64_t seed, bool with_attention_pool,
                                     std::size_t attention_dim)
    : encoder_([&] {
        Rng rng(derive_seed(seed, fnv1a64("encoder-init")));
        return TransformerEncoder(backbone.config, rng);
      }()) {
  Rng rng(derive_seed(seed, fnv1a64("head-init")));
  head_ = Linear(backbone.config.hidden, 2, rng, backbone.config.init_std);
  if (with_attention_pool) pool_.emplace(backbone.config.hidden, attention_dim, rng);
  if (backbone.pretrained) {
    const auto params = encoder_.named_parameters();
    std::vector<std::string> missing;
    for (const auto& p : params)
      if (!backbone.pretrained->count(p.name)) missing.push_back(p.name);
    for (const auto& name : missing) {
      if (name.rfind("bert.pooler.", 0) != 0)
        throw ConfigError("backbone '" + backbone.id + "' checkpoint lacks tensor " + name);
    }
    if (!missing.empty()) spdlog::warn("backbone '{}' has no pooler weights; pooler starts random", backbone.id);
    nn::load_state_dict(params, *backbone.pretrained, false);
  }
}

nn::Var ClassifierNetwork::embed(const EncodedSequence& seq) const {
  const std::size_t n = seq.length();
  return encoder_.pooled(std::span<const std::int32_t>(seq.token_ids.data(), n));
}

std::vector<nn::NamedParameter> ClassifierNetwork::named_parameters() const {
  auto params = encoder_.named_parameters();
  head_.append_parameters("classifier.", params);
  if (pool_) pool_->append_parameters("mil.attention.", params);
  return params;
}

void check_tokenizer(const TrainedModel& model, std::span<const EncodedSequence> seqs) {
  for (const auto& s : seqs) {
    if (s.tokenizer_id != model.tokenizer().id())
      throw ConfigError("sequence encoded with tokenizer '" + s.tokenizer_id + "' but the model uses '" +
                        model.tokenizer().id() + "'");
  }
}

TrainHistory run_training(ClassifierNetwork& network, const TrainingTask& task, const TrainConfig& config,
                          const EpochCallback& on_epoch) {
  if (task.n_items == 0) throw ValidationError("training set is empty");
  const auto params = network.named_parameters();
  AdamW optimizer(params, {0.9, 0.999, config.adam_epsilon, config.weight_decay});
  const BatchPlan plan{task.batch_size};
  const std::size_t per_epoch = (task.n_items + plan.batch_size - 1) / plan.batch_size;
  const std::size_t total = per_epoch * config.max_epochs;
  const LinearWarmupSchedule schedule(config.learning_rate, warmup_steps_for(total, config.warmup_fraction), total);

  TrainHistory history;
  history.warmup_steps = schedule.warmup_steps();
  history.total_steps = total;
  nn::StateDict best_state;
  double best = -1.0;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    BatchStream stream(task.n_items, plan, Regime::train, epoch_seed(config.seed, epoch));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    double lr = 0.0;
    while (auto batch = stream.next()) {
      optimizer.zero_grad();
      const nn::Var loss = task.batch_loss(*batch);
      if (!std::isfinite(loss.scalar()))
        throw TrainingDiverged(fmt::format("non-finite loss at epoch {}, step {} (lr {:g})", epoch, step,
                                           config.learning_rate));
      nn::backward(loss);
      const double norm = clip_grad_norm(params, config.clip_norm);
      if (!std::isfinite(norm))
        throw TrainingDiverged("non-finite gradient norm at epoch " + std::to_string(epoch) + ", step " +
                               std::to_string(step));
      lr = schedule.at(step);
      optimizer.step(lr);
      ++step;
      loss_sum += loss.scalar();
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.val_f1 = task.validate();
    rec.learning_rate = lr;
    rec.weights_fingerprint = nn::fingerprint(params);
    history.epochs.push_back(rec);
    spdlog::debug("epoch {} loss {:.5f} val_f1 {:.4f} lr {:.3g}", epoch, rec.train_loss, rec.val_f1, lr);
    if (on_epoch) on_epoch(rec, network);

    if (rec.val_f1 > best) {
      best = rec.val_f1;
      history.best_epoch = epoch;
      history.best_val_f1 = rec.val_f1;
      best_state = nn::state_dict(params);
    } else if (epoch - history.best_epoch >= config.patience) {
      history.stop_reason = StopReason::early_stop;
      break;
    }
  }
  nn::load_state_dict(params, best_state, true);
  return history;
}

namespace {

bool has_both_classes(std::span<const EncodedSequence> seqs) {
  bool pos = false, neg = false;
  for (const auto& s : seqs) (s.label == Label::positive ? pos : neg) = true;
  return pos && neg;
}

}  // namespace

double sentence_f1(const ClassifierNetwork& network, std::span<const EncodedSequence> seqs) {
  nn::NoGradGuard guard;
  std::vector<LabeledPrediction> items;
  items.reserve(seqs.size());
  for (const auto& s : seqs) {
    const nn::Matrix p = nn::softmax_rows(network.logits(s).value());
    items.push_back({s.label, max_confidence_label(p(0, 1), p(0, 0))});
  }
  return compute_metrics(items, Level::sentence).f1;
}

std::pair<TrainedModel, TrainHistory> fine_tune(const Backbone& backbone, std::span<const EncodedSequence> train,
                                                std::span<const EncodedSequence> val, const TrainConfig& config,
                                                const EpochCallback& on_epoch) {
  if (train.empty() || val.empty()) throw ValidationError("fine_tune needs non-empty train and validation sets");
  if (!has_both_classes(val)) spdlog::warn("validation set lacks one class; F1 is degenerate");
  TrainedModel model;
  model.backbone = backbone;
  model.config = config;
  check_tokenizer(model, train);
  check_tokenizer(model, val);
  model.network = std::make_shared<ClassifierNetwork>(backbone, config.seed, false);
  auto& net = *model.network;

  TrainingTask task;
  task.n_items = train.size();
  task.batch_size = config.batch_size;
  task.batch_loss = [&](std::span<const std::size_t> batch) {
    std::vector<nn::Var> losses;
    losses.reserve(batch.size());
    for (std::size_t i : batch) losses.push_back(nn::cross_entropy(net.logits(train[i]), to_int(train[i].label)));
    return nn::sum_scalars(losses, 1.0 / static_cast<double>(batch.size()));
  };
  task.validate = [&] { return sentence_f1(net, val); };

  TrainHistory history = run_training(net, task, config, on_epoch);
  model.best_epoch = history.best_epoch;
  model.best_val_f1 = history.best_val_f1;
  return {std::move(model), std::move(history)};
}

LrSelection select_learning_rate(const Backbone& backbone, std::span<const EncodedSequence> train,
                                 std::span<const EncodedSequence> val, const TrainConfig& base,
                                 std::span<const double> grid) {
  if (grid.empty()) throw ValidationError("learning-rate grid is empty");
  std::optional<LrSelection> best;
  std::vector<std::pair<double, std::optional<double>>> scores;
  std::string last_error;
  for (double lr : grid) {
    TrainConfig cfg = base;
    cfg.learning_rate = lr;
    try {
      auto [model, history] = fine_tune(backbone, train, val, cfg);
      scores.emplace_back(lr, history.best_val_f1);
      const bool better = !best || history.best_val_f1 > best->history.best_val_f1 ||
                          (history.best_val_f1 == best->history.best_val_f1 && lr < best->config.learning_rate);
      if (better) best = LrSelection{cfg, std::move(model), std::move(history), {}};
    } catch (const TrainingDiverged& e) {
      spdlog::warn("learning rate {} diverged: {}", lr, e.what());
      scores.emplace_back(lr, std::nullopt);
      last_error = e.what();
    }
  }
  if (!best) throw TrainingDiverged("every learning rate in the grid diverged; last: " + last_error);
  best->grid_scores = std::move(scores);
  return std::move(*best);
}

std::vector<PredictionRecord> predict_sentences(const TrainedModel& model, std::span<const EncodedSequence> seqs) {
  check_tokenizer(model, seqs);
  nn::NoGradGuard guard;
  std::vector<PredictionRecord> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    const nn::Matrix p = nn::softmax_rows(model.network->logits(s).value());
    PredictionRecord r;
    r.study_id = s.origin.study_id;
    r.sentence_index = s.origin.sentence_index;
    r.p_positive = p(0, 1);
    r.p_negative = p(0, 0);
    r.predicted_label = max_confidence_label(r.p_positive, r.p_negative);
    out.push_back(std::move(r));
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& dir, const TrainedModel& model, const TrainHistory& history) {
  std::filesystem::create_directories(dir);
  write_safetensors(dir / "weights.safetensors", nn::state_dict(model.network->named_parameters()),
                    {{"format", "eq5d"}});
  nlohmann::json meta = {{"backbone_id", model.backbone.id},
                         {"checkpoint", model.backbone.checkpoint},
                         {"architecture", to_json(model.backbone.config)},
                         {"tokenizer_id", model.tokenizer().id()},
                         {"lowercase", model.tokenizer().lowercase()},
                         {"attention_pool", model.network->has_attention_pool()},
                         {"train_config", to_json(model.config)},
                         {"best_epoch", model.best_epoch},
                         {"best_val_f1", model.best_val_f1}};
  write_json_file(dir / "model.json", meta);
  write_json_file(dir / "history.json", to_json(history));
  model.tokenizer().vocab().save(dir / "vocab.txt");
}

std::pair<TrainedModel, TrainHistory> load_checkpoint(const std::filesystem::path& dir) {
  const auto meta = read_json_file(dir / "model.json");
  TrainedModel model;
  model.backbone.id = meta.at("backbone_id").get<std::string>();
  model.backbone.checkpoint = meta.at("checkpoint").get<std::string>();
  model.backbone.config = backbone_config_from_json(meta.at("architecture"));
  model.backbone.tokenizer = std::make_shared<WordPieceTokenizer>(Vocabulary::from_file(dir / "vocab.txt"),
                                                                  meta.at("lowercase").get<bool>(),
                                                                  meta.at("tokenizer_id").get<std::string>());
  model.config = train_config_from_json(meta.at("train_config"));
  model.best_epoch = meta.at("best_epoch").get<std::size_t>();
  model.best_val_f1 = meta.at("best_val_f1").get<double>();
  model.network = std::make_shared<ClassifierNetwork>(model.backbone, model.config.seed,
                                                      meta.at("attention_pool").get<bool>(),
                                                      model.config.attention_dim);
  nn::load_state_dict(model.network->named_parameters(), read_safetensors(dir / "weights.safetensors").tensors, true);
  return {std::move(model), train_history_from_json(read_json_file(dir / "history.json"))};
}

}  // namespace eq5d
