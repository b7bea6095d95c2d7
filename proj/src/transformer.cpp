// SPDX-License-Identifier: Apache-2.0
#include "eq5d/transformer.hpp"

#include <cmath>

#include "eq5d/error.hpp"

namespace eq5d {

namespace {

nn::Matrix normal_matrix(std::size_t rows, std::size_t cols, Rng& rng, double std) {
  nn::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std * rng.normal();
  return m;
}

template <typename T>
T pick(const nlohmann::json& j, const char* native, const char* hf, T fallback) {
  if (j.contains(native)) return j.at(native).get<T>();
  if (j.contains(hf)) return j.at(hf).get<T>();
  return fallback;
}

}  // namespace

nlohmann::json to_json(const BackboneConfig& c) {
  return {{"vocab_size", c.vocab_size},         {"hidden", c.hidden},
          {"layers", c.layers},                 {"heads", c.heads},
          {"intermediate", c.intermediate},     {"max_positions", c.max_positions},
          {"type_vocab", c.type_vocab},         {"layer_norm_eps", c.layer_norm_eps},
          {"init_std", c.init_std}};
}

BackboneConfig backbone_config_from_json(const nlohmann::json& j) {
  BackboneConfig c;
  c.vocab_size = pick<std::size_t>(j, "vocab_size", "vocab_size", c.vocab_size);
  c.hidden = pick<std::size_t>(j, "hidden", "hidden_size", c.hidden);
  c.layers = pick<std::size_t>(j, "layers", "num_hidden_layers", c.layers);
  c.heads = pick<std::size_t>(j, "heads", "num_attention_heads", c.heads);
  c.intermediate = pick<std::size_t>(j, "intermediate", "intermediate_size", c.intermediate);
  c.max_positions = pick<std::size_t>(j, "max_positions", "max_position_embeddings", c.max_positions);
  c.type_vocab = pick<std::size_t>(j, "type_vocab", "type_vocab_size", c.type_vocab);
  c.layer_norm_eps = pick<double>(j, "layer_norm_eps", "layer_norm_eps", c.layer_norm_eps);
  c.init_std = pick<double>(j, "init_std", "initializer_range", c.init_std);
  if (j.contains("hidden_act") && j.at("hidden_act").get<std::string>() != "gelu")
    throw ConfigError("unsupported hidden_act '" + j.at("hidden_act").get<std::string>() + "' (only gelu)");
  if (c.heads == 0 || c.hidden % c.heads != 0) throw ConfigError("hidden size must be divisible by the head count");
  return c;
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, double std)
    : weight(normal_matrix(out, in, rng, std), true),
      bias(nn::Matrix::Zero(1, static_cast<Eigen::Index>(out)), true) {}

void Linear::append_parameters(const std::string& prefix, std::vector<nn::NamedParameter>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

LayerNorm::LayerNorm(std::size_t dim, double eps_)
    : weight(nn::Matrix::Ones(1, static_cast<Eigen::Index>(dim)), true),
      bias(nn::Matrix::Zero(1, static_cast<Eigen::Index>(dim)), true),
      eps(eps_) {}

void LayerNorm::append_parameters(const std::string& prefix, std::vector<nn::NamedParameter>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

TransformerEncoder::TransformerEncoder(const BackboneConfig& config, Rng& rng) : config_(config) {
  if (config_.vocab_size == 0) throw ConfigError("backbone vocab_size is zero");
  if (config_.heads == 0 || config_.hidden % config_.heads != 0)
    throw ConfigError("hidden size must be divisible by the head count");
  const double s = config_.init_std;
  const auto h = config_.hidden;
  word_embeddings_ = nn::Var(normal_matrix(config_.vocab_size, h, rng, s), true);
  position_embeddings_ = nn::Var(normal_matrix(config_.max_positions, h, rng, s), true);
  token_type_embeddings_ = nn::Var(normal_matrix(config_.type_vocab, h, rng, s), true);
  embedding_norm_ = LayerNorm(h, config_.layer_norm_eps);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    Layer layer;
    layer.query = Linear(h, h, rng, s);
    layer.key = Linear(h, h, rng, s);
    layer.value = Linear(h, h, rng, s);
    layer.attn_out = Linear(h, h, rng, s);
    layer.attn_norm = LayerNorm(h, config_.layer_norm_eps);
    layer.intermediate = Linear(h, config_.intermediate, rng, s);
    layer.output = Linear(config_.intermediate, h, rng, s);
    layer.out_norm = LayerNorm(h, config_.layer_norm_eps);
    layers_.push_back(std::move(layer));
  }
  pooler_ = Linear(h, h, rng, s);
}

nn::Var TransformerEncoder::embed(std::span<const std::int32_t> ids) const {
  if (ids.empty()) throw ValidationError("encoder input is empty");
  if (ids.size() > config_.max_positions)
    throw ValidationError("sequence of " + std::to_string(ids.size()) + " tokens exceeds " +
                          std::to_string(config_.max_positions) + " positions");
  std::vector<std::int32_t> positions(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<std::int32_t>(i);
  const std::vector<std::int32_t> types(ids.size(), 0);
  auto x = nn::add(nn::gather_rows(word_embeddings_, ids), nn::gather_rows(position_embeddings_, positions));
  x = nn::add(x, nn::gather_rows(token_type_embeddings_, types));
  return embedding_norm_(x);
}

nn::Var TransformerEncoder::run_layer(const Layer& layer, const nn::Var& x, bool first_row_only) const {
  const auto head_dim = static_cast<Eigen::Index>(config_.hidden / config_.heads);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const nn::Var queries_in = first_row_only ? nn::slice_rows(x, 0, 1) : x;
  const auto q = layer.query(queries_in);
  const auto k = layer.key(x);
  const auto v = layer.value(x);
  std::vector<nn::Var> heads;
  heads.reserve(config_.heads);
  for (std::size_t hd = 0; hd < config_.heads; ++hd) {
    const auto c0 = static_cast<Eigen::Index>(hd) * head_dim;
    const auto qh = nn::slice_cols(q, c0, head_dim);
    const auto kh = nn::slice_cols(k, c0, head_dim);
    const auto vh = nn::slice_cols(v, c0, head_dim);
    const auto probs = nn::softmax_rows(nn::scale(nn::matmul(qh, nn::transpose(kh)), inv_sqrt));
    heads.push_back(nn::matmul(probs, vh));
  }
  const auto context = heads.size() == 1 ? heads.front() : nn::concat_cols(heads);
  const auto attended = layer.attn_norm(nn::add(layer.attn_out(context), queries_in));
  const auto ff = layer.output(nn::gelu(layer.intermediate(attended)));
  return layer.out_norm(nn::add(ff, attended));
}

nn::Var TransformerEncoder::hidden_states(std::span<const std::int32_t> ids) const {
  auto x = embed(ids);
  for (const auto& layer : layers_) x = run_layer(layer, x, false);
  return x;
}

nn::Var TransformerEncoder::first_token_state(std::span<const std::int32_t> ids) const {
  auto x = embed(ids);
  if (layers_.empty()) return nn::slice_rows(x, 0, 1);
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) x = run_layer(layers_[l], x, false);
  return run_layer(layers_.back(), x, true);
}

nn::Var TransformerEncoder::pooled(std::span<const std::int32_t> ids) const {
  return nn::tanh(pooler_(first_token_state(ids)));
}

std::vector<nn::NamedParameter> TransformerEncoder::named_parameters(const std::string& prefix) const {
  std::vector<nn::NamedParameter> out;
  const std::string e = prefix + "embeddings.";
  out.push_back({e + "word_embeddings.weight", word_embeddings_});
  out.push_back({e + "position_embeddings.weight", position_embeddings_});
  out.push_back({e + "token_type_embeddings.weight", token_type_embeddings_});
  embedding_norm_.append_parameters(e + "LayerNorm", out);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    const std::string p = prefix + "encoder.layer." + std::to_string(l) + ".";
    L.query.append_parameters(p + "attention.self.query", out);
    L.key.append_parameters(p + "attention.self.key", out);
    L.value.append_parameters(p + "attention.self.value", out);
    L.attn_out.append_parameters(p + "attention.output.dense", out);
    L.attn_norm.append_parameters(p + "attention.output.LayerNorm", out);
    L.intermediate.append_parameters(p + "intermediate.dense", out);
    L.output.append_parameters(p + "output.dense", out);
    L.out_norm.append_parameters(p + "output.LayerNorm", out);
  }
  pooler_.append_parameters(prefix + "pooler.dense", out);
  return out;
}

}  // namespace eq5d
