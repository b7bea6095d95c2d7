// SPDX-License-Identifier: Apache-2.0
#include "eq5d/backbone.hpp"

#include <cstdlib>

#include "eq5d/config.hpp"
#include "eq5d/error.hpp"
#include "eq5d/rng.hpp"
#include "eq5d/safetensors.hpp"

namespace eq5d {

namespace {

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

std::string replace_suffix(const std::string& s, std::string_view from, std::string_view to) {
  if (s.size() >= from.size() && s.compare(s.size() - from.size(), from.size(), from) == 0)
    return s.substr(0, s.size() - from.size()) + std::string(to);
  return s;
}

}  // namespace

nn::StateDict canonical_bert_names(const nn::StateDict& raw) {
  nn::StateDict out;
  for (const auto& [name, m] : raw) {
    if (starts_with(name, "cls.")) continue;
    std::string n = name;
    if (!starts_with(n, "bert.") && !starts_with(n, "classifier.") && !starts_with(n, "mil.")) n = "bert." + n;
    n = replace_suffix(n, "LayerNorm.gamma", "LayerNorm.weight");
    n = replace_suffix(n, "LayerNorm.beta", "LayerNorm.bias");
    if (n.find("position_ids") != std::string::npos) continue;
    out.emplace(std::move(n), m);
  }
  return out;
}

Backbone load_pretrained_backbone(std::string id, const std::filesystem::path& dir, bool lowercase,
                                  std::string checkpoint_name) {
  namespace fs = std::filesystem;
  for (const char* f : {"config.json", "vocab.txt", "model.safetensors"}) {
    if (!fs::exists(dir / f))
      throw ConfigError("backbone '" + id + "' weights unavailable: missing " + (dir / f).string());
  }
  Backbone b;
  b.id = std::move(id);
  b.checkpoint = checkpoint_name.empty() ? dir.filename().string() : std::move(checkpoint_name);
  b.config = backbone_config_from_json(read_json_file(dir / "config.json"));
  if (fs::exists(dir / "tokenizer_config.json")) {
    const auto tc = read_json_file(dir / "tokenizer_config.json");
    lowercase = tc.value("do_lower_case", lowercase);
  }
  auto vocab = Vocabulary::from_file(dir / "vocab.txt");
  if (b.config.vocab_size != vocab.size())
    throw ConfigError("backbone '" + b.id + "': config vocab_size " + std::to_string(b.config.vocab_size) +
                      " does not match vocab.txt (" + std::to_string(vocab.size()) + ")");
  b.tokenizer = std::make_shared<WordPieceTokenizer>(std::move(vocab), lowercase, b.checkpoint);
  b.pretrained = std::make_shared<nn::StateDict>(canonical_bert_names(read_safetensors(dir / "model.safetensors").tensors));
  return b;
}

Backbone make_random_backbone(std::string id, BackboneConfig config, std::span<const std::string> texts, bool lowercase,
                              std::size_t max_vocab) {
  auto vocab = Vocabulary::build(texts, lowercase, max_vocab);
  Backbone b;
  b.id = std::move(id);
  b.checkpoint = "random-init";
  config.vocab_size = vocab.size();
  b.config = config;
  const std::string tok_id = b.id + ":" + hex64(vocab.fingerprint()).substr(0, 12);
  b.tokenizer = std::make_shared<WordPieceTokenizer>(std::move(vocab), lowercase, tok_id);
  return b;
}

BackboneRegistry BackboneRegistry::from_json(const nlohmann::json& root) {
  BackboneRegistry reg;
  const auto& block = root.contains("backbones") ? root.at("backbones") : root;
  for (const auto& [id, cfg] : block.items()) {
    Entry e;
    e.random_init = cfg.contains("architecture");
    e.architecture = cfg.value("architecture", nlohmann::json::object());
    e.checkpoint = cfg.value("checkpoint", std::string(e.random_init ? "random-init" : id));
    e.path = cfg.value("path", std::string{});
    e.lowercase = cfg.value("lowercase", true);
    e.max_vocab = cfg.value("max_vocab", std::size_t{8000});
    reg.entries_.emplace(id, std::move(e));
  }
  return reg;
}

BackboneRegistry BackboneRegistry::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

std::vector<std::string> BackboneRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : entries_) out.push_back(id);
  return out;
}

bool BackboneRegistry::contains(std::string_view id) const { return entries_.find(id) != entries_.end(); }

bool BackboneRegistry::is_pretrained(std::string_view id) const {
  const auto it = entries_.find(id);
  return it != entries_.end() && !it->second.random_init;
}

std::string BackboneRegistry::checkpoint_name(std::string_view id) const {
  const auto it = entries_.find(id);
  if (it == entries_.end()) throw ConfigError("unknown backbone '" + std::string(id) + "'");
  return it->second.checkpoint;
}

Backbone BackboneRegistry::resolve(std::string_view id, std::span<const std::string> vocab_texts) const {
  const auto it = entries_.find(id);
  if (it == entries_.end()) throw ConfigError("unknown backbone '" + std::string(id) + "'");
  const Entry& e = it->second;
  if (e.random_init) {
    if (vocab_texts.empty())
      throw ConfigError("backbone '" + std::string(id) + "' is randomly initialised and needs training text for its vocabulary");
    return make_random_backbone(std::string(id), backbone_config_from_json(e.architecture), vocab_texts, e.lowercase,
                                e.max_vocab);
  }
  std::filesystem::path dir;
  if (!e.path.empty()) {
    dir = expand_env(e.path);
  } else {
    const char* root = std::getenv("EQ5D_CHECKPOINT_DIR");
    if (!root || !*root)
      throw ConfigError("backbone '" + std::string(id) + "' weights unavailable: EQ5D_CHECKPOINT_DIR is not set (expects " +
                        e.checkpoint + "/ under it)");
    dir = std::filesystem::path(root) / e.checkpoint;
  }
  return load_pretrained_backbone(std::string(id), dir, e.lowercase, e.checkpoint);
}

}  // namespace eq5d
