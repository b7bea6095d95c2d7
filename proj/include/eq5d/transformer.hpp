// SPDX-License-Identifier: Apache-2.0
#pragma once

// BERT-architecture encoder (post-norm, GELU feed-forward, learned absolute
// positions, tanh pooler over the first token). Parameter names and layouts
// follow the Hugging Face BERT checkpoints so pretrained weights load
// directly; a randomly initialised miniature variant serves smoke runs.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eq5d/autograd.hpp"
#include "eq5d/rng.hpp"

namespace eq5d {

struct BackboneConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t intermediate = 128;
  std::size_t max_positions = 512;
  std::size_t type_vocab = 2;
  double layer_norm_eps = 1e-12;
  double init_std = 0.02;

  bool operator==(const BackboneConfig&) const = default;
};

nlohmann::json to_json(const BackboneConfig& c);
/// Accepts both the native keys and the Hugging Face config.json keys
/// (hidden_size, num_hidden_layers, ...). Rejects activations other than gelu.
BackboneConfig backbone_config_from_json(const nlohmann::json& j);

class Linear {
 public:
  Linear() = default;
  /// Weight (out x in) ~ N(0, std^2), zero bias.
  Linear(std::size_t in, std::size_t out, Rng& rng, double std);

  nn::Var operator()(const nn::Var& x) const { return nn::linear(x, weight, bias); }
  void append_parameters(const std::string& prefix, std::vector<nn::NamedParameter>& out) const;

  nn::Var weight;
  nn::Var bias;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(std::size_t dim, double eps);

  nn::Var operator()(const nn::Var& x) const { return nn::layer_norm(x, weight, bias, eps); }
  void append_parameters(const std::string& prefix, std::vector<nn::NamedParameter>& out) const;

  nn::Var weight;
  nn::Var bias;
  double eps = 1e-12;
};

class TransformerEncoder {
 public:
  TransformerEncoder(const BackboneConfig& config, Rng& rng);

  /// Hidden states (n x hidden) for n real tokens. Attention runs over exactly
  /// these positions, which is what a prefix attention mask selects.
  nn::Var hidden_states(std::span<const std::int32_t> ids) const;
  /// Final-layer state of the first token only; skips the work for the other
  /// query positions in the last layer.
  nn::Var first_token_state(std::span<const std::int32_t> ids) const;
  /// tanh(pooler(first_token_state)), 1 x hidden.
  nn::Var pooled(std::span<const std::int32_t> ids) const;

  /// Names start with `prefix` ("bert." by default).
  std::vector<nn::NamedParameter> named_parameters(const std::string& prefix = "bert.") const;
  const BackboneConfig& config() const { return config_; }

 private:
  struct Layer {
    Linear query, key, value, attn_out;
    LayerNorm attn_norm;
    Linear intermediate, output;
    LayerNorm out_norm;
  };

  nn::Var embed(std::span<const std::int32_t> ids) const;
  nn::Var run_layer(const Layer& layer, const nn::Var& x, bool first_row_only) const;

  BackboneConfig config_;
  nn::Var word_embeddings_, position_embeddings_, token_type_embeddings_;
  LayerNorm embedding_norm_;
  std::vector<Layer> layers_;
  Linear pooler_;
};

}  // namespace eq5d
