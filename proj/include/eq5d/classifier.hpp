// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eq5d/aggregation.hpp"
#include "eq5d/attention_pool.hpp"
#include "eq5d/backbone.hpp"
#include "eq5d/encoding.hpp"
#include "eq5d/transformer.hpp"

namespace eq5d {

/// Fine-tuning hyperparameters. Defaults are the reference configuration;
/// overrides() lists every field that differs from them.
struct TrainConfig {
  std::string backbone_id = "bert";
  double learning_rate = 2e-5;
  std::size_t max_epochs = 20;
  double warmup_fraction = 0.10;
  std::size_t patience = 5;
  double adam_epsilon = 1e-8;
  std::size_t max_len = 256;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  std::size_t attention_dim = kDefaultAttentionDim;
  std::size_t max_bag = 64;

  std::vector<std::string> overrides() const;
  bool operator==(const TrainConfig&) const = default;
};

/// The reference learning-rate grid.
std::vector<double> default_lr_grid();

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

enum class StopReason { early_stop, max_epochs };
std::string_view to_string(StopReason r);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_f1 = 0.0;
  double learning_rate = 0.0;  // rate applied on the epoch's last step
  std::uint64_t weights_fingerprint = 0;
  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  StopReason stop_reason = StopReason::max_epochs;
  std::size_t best_epoch = 0;
  double best_val_f1 = 0.0;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 0;
  bool operator==(const TrainHistory&) const = default;
};

nlohmann::json to_json(const TrainHistory& h);
TrainHistory train_history_from_json(const nlohmann::json& j);

/// Encoder plus a linear two-way head over the pooled first-token output.
/// MIL models additionally carry an attention pool between the two.
class ClassifierNetwork {
 public:
  /// Random init from `seed`, then the backbone's pretrained weights when it
  /// has them.
  ClassifierNetwork(const Backbone& backbone, std::uint64_t seed, bool with_attention_pool,
                    std::size_t attention_dim = kDefaultAttentionDim);

  /// Pooled representation (1 x hidden) of one encoded sequence.
  nn::Var embed(const EncodedSequence& seq) const;
  /// Head logits (1 x 2) for a representation row; column 1 is positive.
  nn::Var head(const nn::Var& representation) const { return head_(representation); }
  nn::Var logits(const EncodedSequence& seq) const { return head(embed(seq)); }

  bool has_attention_pool() const { return pool_.has_value(); }
  const AttentionPool& pool() const { return *pool_; }

  std::vector<nn::NamedParameter> named_parameters() const;
  const TransformerEncoder& encoder() const { return encoder_; }

 private:
  TransformerEncoder encoder_;
  Linear head_;
  std::optional<AttentionPool> pool_;
};

struct TrainedModel {
  Backbone backbone;
  TrainConfig config;
  std::shared_ptr<ClassifierNetwork> network;
  std::size_t best_epoch = 0;
  double best_val_f1 = 0.0;

  const WordPieceTokenizer& tokenizer() const { return *backbone.tokenizer; }
};

/// Throws ConfigError if any sequence was encoded with a different tokenizer.
void check_tokenizer(const TrainedModel& model, std::span<const EncodedSequence> seqs);

/// Training loop shared by sentence fine-tuning and MIL. `batch_loss` builds
/// the mean loss of a batch of item indices; `validate` returns validation F1
/// for the current weights.
struct TrainingTask {
  std::size_t n_items = 0;
  std::size_t batch_size = 16;
  std::function<nn::Var(std::span<const std::size_t>)> batch_loss;
  std::function<double()> validate;
};

/// Called after each completed epoch, before any restoration.
using EpochCallback = std::function<void(const EpochRecord&, const ClassifierNetwork&)>;

/// Runs AdamW with linear warm-up/decay, global-norm clipping and early
/// stopping on strict validation improvement, then restores the best epoch.
/// Throws TrainingDiverged when a loss or gradient is not finite.
TrainHistory run_training(ClassifierNetwork& network, const TrainingTask& task, const TrainConfig& config,
                          const EpochCallback& on_epoch = {});

/// Sentence-level fine-tuning, early-stopped on validation sentence F1.
std::pair<TrainedModel, TrainHistory> fine_tune(const Backbone& backbone, std::span<const EncodedSequence> train,
                                                std::span<const EncodedSequence> val, const TrainConfig& config,
                                                const EpochCallback& on_epoch = {});

struct LrSelection {
  TrainConfig config;
  TrainedModel model;
  TrainHistory history;
  std::vector<std::pair<double, std::optional<double>>> grid_scores;  // nullopt → diverged
};

/// Trains once per grid rate and keeps the highest validation F1, preferring
/// the smaller rate on ties. Diverged rates are skipped; if every rate
/// diverges the last error is rethrown.
LrSelection select_learning_rate(const Backbone& backbone, std::span<const EncodedSequence> train,
                                 std::span<const EncodedSequence> val, const TrainConfig& base,
                                 std::span<const double> grid);

std::vector<PredictionRecord> predict_sentences(const TrainedModel& model, std::span<const EncodedSequence> seqs);

/// F1 of argmax predictions against sequence labels.
double sentence_f1(const ClassifierNetwork& network, std::span<const EncodedSequence> seqs);

/// Writes weights.safetensors, model.json, history.json and vocab.txt under dir.
void save_checkpoint(const std::filesystem::path& dir, const TrainedModel& model, const TrainHistory& history);
std::pair<TrainedModel, TrainHistory> load_checkpoint(const std::filesystem::path& dir);

}  // namespace eq5d
