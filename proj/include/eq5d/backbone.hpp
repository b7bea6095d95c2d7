// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "eq5d/autograd.hpp"
#include "eq5d/tokenizer.hpp"
#include "eq5d/transformer.hpp"

namespace eq5d {

/// A resolved backbone: architecture, tokenizer and (for pretrained ids) the
/// encoder weights every fine-tuning run starts from.
struct Backbone {
  std::string id;
  std::string checkpoint;  // published checkpoint name, or "random-init"
  BackboneConfig config;
  std::shared_ptr<const WordPieceTokenizer> tokenizer;
  std::shared_ptr<const nn::StateDict> pretrained;  // null → random init from the run seed

  bool is_pretrained() const { return static_cast<bool>(pretrained); }
};

/// Backbone id → checkpoint binding, from the "backbones" block of the
/// bindings file. Pretrained entries name a checkpoint directory under
/// $EQ5D_CHECKPOINT_DIR (or an explicit "path") holding config.json,
/// vocab.txt and model.safetensors. Entries with an "architecture" block are
/// randomly initialised and get a vocabulary built from the training text.
class BackboneRegistry {
 public:
  static BackboneRegistry from_json(const nlohmann::json& j);
  static BackboneRegistry load(const std::filesystem::path& path);

  std::vector<std::string> ids() const;
  bool contains(std::string_view id) const;
  bool is_pretrained(std::string_view id) const;
  std::string checkpoint_name(std::string_view id) const;

  /// Throws ConfigError when the id is unknown or its weights are unavailable.
  Backbone resolve(std::string_view id, std::span<const std::string> vocab_texts = {}) const;

 private:
  struct Entry {
    std::string checkpoint;
    std::string path;  // optional explicit directory
    bool lowercase = true;
    bool random_init = false;
    nlohmann::json architecture;
    std::size_t max_vocab = 8000;
  };
  std::map<std::string, Entry, std::less<>> entries_;
};

/// Loads a Hugging Face style BERT directory.
Backbone load_pretrained_backbone(std::string id, const std::filesystem::path& dir, bool lowercase,
                                  std::string checkpoint_name = {});

/// Canonicalises BERT tensor names: adds the "bert." prefix when missing,
/// maps LayerNorm gamma/beta to weight/bias, drops pretraining heads.
nn::StateDict canonical_bert_names(const nn::StateDict& raw);

/// Randomly initialised backbone with a vocabulary built from `texts`.
Backbone make_random_backbone(std::string id, BackboneConfig config, std::span<const std::string> texts,
                              bool lowercase = true, std::size_t max_vocab = 8000);

}  // namespace eq5d
