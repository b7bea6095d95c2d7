// SPDX-License-Identifier: Apache-2.0
#include "eq5d/enrichment.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>
#include <sys/wait.h>
#include <unistd.h>

#include "eq5d/config.hpp"
#include "eq5d/error.hpp"
#include "eq5d/rng.hpp"

namespace eq5d {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

void sort_mentions(std::vector<EntityMention>& m) {
  std::stable_sort(m.begin(), m.end(), [](const EntityMention& a, const EntityMention& b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
}

bool renderable(const EntityMention& m) {
  auto bad = [](const std::string& s) {
    return s.empty() || s.find('|') != std::string::npos || s.find("; ") != std::string::npos ||
           s.find(']') != std::string::npos;
  };
  return !bad(m.surface) && !bad(m.entity_label);
}

std::string shell_quote(const std::string& arg) {
  std::string out = "'";
  for (char c : arg) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  return out + "'";
}

/// Temporary file removed on scope exit.
class TempFile {
 public:
  explicit TempFile(const std::string& tag) {
    std::string tmpl = (std::filesystem::temp_directory_path() / ("eq5d_" + tag + "_XXXXXX")).string();
    const int fd = ::mkstemp(tmpl.data());
    if (fd < 0) throw Error("cannot create temporary file");
    ::close(fd);
    path_ = tmpl;
  }
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_command(const std::vector<std::string>& argv, const std::filesystem::path* stdin_path,
                const std::filesystem::path& stdout_path, const std::filesystem::path& stderr_path) {
  std::string cmd;
  for (const auto& a : argv) {
    if (!cmd.empty()) cmd.push_back(' ');
    cmd += shell_quote(a);
  }
  if (stdin_path) cmd += " < " + shell_quote(stdin_path->string());
  cmd += " > " + shell_quote(stdout_path.string()) + " 2> " + shell_quote(stderr_path.string());
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// --- RegexBackend ------------------------------------------------------------

RegexBackend::RegexBackend(std::vector<std::string> patterns, std::string entity_label, std::string backend_id)
    : id_(std::move(backend_id)), label_(std::move(entity_label)), patterns_(std::move(patterns)) {
  compiled_.reserve(patterns_.size());
  for (const auto& p : patterns_) {
    try {
      compiled_.emplace_back(p, std::regex::ECMAScript | std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw ConfigError("backend '" + id_ + "': invalid pattern '" + p + "': " + e.what());
    }
  }
}

std::string RegexBackend::version() const {
  std::uint64_t h = fnv1a64(label_);
  for (const auto& p : patterns_) h = fnv1a64(p + '\x1f', h);
  return "builtin-regex/" + hex64(h).substr(0, 8);
}

std::vector<std::string> RegexBackend::segment(std::string_view abstract) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < abstract.size(); ++i) {
    if (abstract[i] == '.' && i + 1 < abstract.size() && is_space(abstract[i + 1])) {
      std::string s = trim(abstract.substr(start, i + 1 - start));
      if (!s.empty()) out.push_back(std::move(s));
      start = i + 1;
    }
  }
  std::string tail = trim(abstract.substr(start));
  if (!tail.empty()) out.push_back(std::move(tail));
  return out;
}

std::vector<EntityMention> RegexBackend::extract(std::string_view sentence) {
  const std::string text(sentence);
  std::vector<EntityMention> out;
  for (const auto& re : compiled_) {
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
      const auto& m = *it;
      if (m.length(0) == 0) continue;
      const auto start = static_cast<std::size_t>(m.position(0));
      const auto end = start + static_cast<std::size_t>(m.length(0));
      const bool seen = std::any_of(out.begin(), out.end(),
                                    [&](const EntityMention& e) { return e.start == start && e.end == end; });
      if (!seen) out.push_back({m.str(0), label_, start, end});
    }
  }
  sort_mentions(out);
  return out;
}

// --- ExternalPipelineBackend -------------------------------------------------

ExternalPipelineBackend::ExternalPipelineBackend(PipelineBinding binding) : binding_(std::move(binding)) {
  if (binding_.command.empty())
    throw ConfigError("enrichment backend '" + binding_.backend_id + "' has no bridge command configured");
  TempFile out("check_out"), err("check_err");
  auto argv = binding_.command;
  argv.push_back("--check");
  const int rc = run_command(argv, nullptr, out.path(), err.path());
  if (rc != 0) {
    throw ConfigError("enrichment backend '" + binding_.backend_id + "' unavailable (pipeline '" + binding_.pipeline +
                      "', exit " + std::to_string(rc) + "): " + trim(slurp(err.path())));
  }
  reported_version_ = binding_.pipeline + "/" + binding_.version;
  try {
    const auto j = nlohmann::json::parse(slurp(out.path()));
    reported_version_ = j.value("pipeline", binding_.pipeline) + "/" + j.value("version", binding_.version);
  } catch (const nlohmann::json::exception&) {
    spdlog::warn("backend '{}': --check printed no version record", binding_.backend_id);
  }
}

std::vector<std::vector<ExternalPipelineBackend::Sentence>> ExternalPipelineBackend::run(
    std::span<const std::string> texts, bool sentence_mode) {
  TempFile in("req"), out("resp"), err("err");
  {
    std::ofstream req(in.path(), std::ios::binary);
    for (std::size_t i = 0; i < texts.size(); ++i)
      req << nlohmann::json{{"id", std::to_string(i)}, {"text", texts[i]}}.dump() << '\n';
  }
  auto argv = binding_.command;
  if (sentence_mode) {
    argv.push_back("--mode");
    argv.push_back("sentence");
  }
  const std::filesystem::path& in_path = in.path();
  const int rc = run_command(argv, &in_path, out.path(), err.path());
  if (rc != 0)
    throw ConfigError("enrichment backend '" + binding_.backend_id + "' failed (exit " + std::to_string(rc) +
                      "): " + trim(slurp(err.path())));

  std::vector<std::vector<Sentence>> result(texts.size());
  std::vector<bool> filled(texts.size(), false);
  std::istringstream lines(slurp(out.path()));
  std::string line;
  while (std::getline(lines, line)) {
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("backend '" + binding_.backend_id + "' emitted malformed output: " + e.what());
    }
    const std::size_t idx = std::stoul(j.at("id").get<std::string>());
    if (idx >= texts.size()) throw ConfigError("backend '" + binding_.backend_id + "' returned an unknown id");
    for (const auto& s : j.at("sentences")) {
      Sentence sent;
      sent.text = s.at("text").get<std::string>();
      for (const auto& e : s.value("entities", nlohmann::json::array())) {
        EntityMention m;
        m.start = e.at("start").get<std::size_t>();
        m.end = e.at("end").get<std::size_t>();
        m.entity_label = e.value("label", std::string("ENTITY"));
        if (m.start >= m.end || m.end > sent.text.size()) continue;
        m.surface = sent.text.substr(m.start, m.end - m.start);
        sent.entities.push_back(std::move(m));
      }
      sort_mentions(sent.entities);
      result[idx].push_back(std::move(sent));
    }
    filled[idx] = true;
  }
  for (std::size_t i = 0; i < texts.size(); ++i)
    if (!filled[i]) throw ConfigError("backend '" + binding_.backend_id + "' returned no record for a request");
  return result;
}

void ExternalPipelineBackend::prefetch(std::span<const std::string> abstracts) {
  std::vector<std::string> todo;
  for (const auto& a : abstracts)
    if (!segment_memo_.count(a)) todo.push_back(a);
  if (todo.empty()) return;
  const auto docs = run(todo, false);
  for (std::size_t i = 0; i < todo.size(); ++i) {
    std::vector<std::string> sents;
    for (const auto& s : docs[i]) {
      sents.push_back(s.text);
      entity_memo_.try_emplace(s.text, s.entities);
    }
    segment_memo_[todo[i]] = std::move(sents);
  }
}

std::vector<std::string> ExternalPipelineBackend::segment(std::string_view abstract) {
  const std::string key(abstract);
  if (!segment_memo_.count(key)) prefetch(std::span(&key, 1));
  return segment_memo_.at(key);
}

std::vector<EntityMention> ExternalPipelineBackend::extract(std::string_view sentence) {
  const std::string key(sentence);
  if (const auto it = entity_memo_.find(key); it != entity_memo_.end()) return it->second;
  const auto docs = run(std::span(&key, 1), true);
  std::vector<EntityMention> mentions;
  // In sentence mode the bridge returns one sentence spanning the whole text.
  if (!docs[0].empty() && docs[0][0].text == key) mentions = docs[0][0].entities;
  entity_memo_[key] = mentions;
  return mentions;
}

// --- registry ----------------------------------------------------------------

EnricherRegistry EnricherRegistry::from_json(const nlohmann::json& root) {
  EnricherRegistry reg;
  const auto& block = root.contains("enrichers") ? root.at("enrichers") : root;
  for (const auto& [id, cfg] : block.items()) {
    Entry e;
    e.kind = cfg.value("kind", std::string(cfg.contains("patterns") ? "regex" : "external"));
    e.binding.backend_id = id;
    e.binding.pipeline = cfg.value("pipeline", id);
    e.binding.version = cfg.value("version", std::string("unversioned"));
    for (const auto& arg : cfg.value("command", nlohmann::json::array()))
      e.binding.command.push_back(expand_env(arg.get<std::string>()));
    e.patterns = cfg.value("patterns", std::vector<std::string>{});
    e.entity_label = cfg.value("entity_label", std::string("ENTITY"));
    reg.entries_.emplace(id, std::move(e));
  }
  return reg;
}

EnricherRegistry EnricherRegistry::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

std::vector<std::string> EnricherRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : entries_) out.push_back(id);
  return out;
}

bool EnricherRegistry::contains(std::string_view id) const { return entries_.find(id) != entries_.end(); }

std::unique_ptr<EnricherBackend> EnricherRegistry::create(std::string_view id) const {
  const auto it = entries_.find(id);
  if (it == entries_.end()) throw ConfigError("unknown enrichment backend '" + std::string(id) + "'");
  const Entry& e = it->second;
  if (e.kind == "regex") return std::make_unique<RegexBackend>(e.patterns, e.entity_label, std::string(id));
  if (e.kind == "external") return std::make_unique<ExternalPipelineBackend>(e.binding);
  throw ConfigError("enrichment backend '" + std::string(id) + "' has unknown kind '" + e.kind + "'");
}

// --- operations --------------------------------------------------------------

std::vector<std::string> segment_abstract(std::string_view abstract, EnricherBackend& backend) {
  if (trim(abstract).empty()) throw ValidationError("segment_abstract: empty abstract");
  return backend.segment(abstract);
}

std::vector<EntityMention> extract_entities(std::string_view sentence, EnricherBackend& backend) {
  if (trim(sentence).empty()) throw ValidationError("extract_entities: empty sentence");
  auto mentions = backend.extract(sentence);
  sort_mentions(mentions);
  return mentions;
}

void validate_mentions(std::string_view raw_text, std::span<const EntityMention> entities) {
  for (const auto& m : entities) {
    if (m.start >= m.end || m.end > raw_text.size())
      throw ValidationError("mention '" + m.surface + "' has span [" + std::to_string(m.start) + ", " +
                            std::to_string(m.end) + ") outside a sentence of length " +
                            std::to_string(raw_text.size()));
    if (raw_text.substr(m.start, m.end - m.start) != m.surface)
      throw ValidationError("mention '" + m.surface + "' does not match sentence text '" +
                            std::string(raw_text.substr(m.start, m.end - m.start)) + "'");
    if (!renderable(m)) throw ValidationError("mention '" + m.surface + "' cannot be rendered unambiguously");
  }
}

std::string render_enriched(std::string_view raw_text, std::span<const EntityMention> entities) {
  validate_mentions(raw_text, entities);
  std::string out(raw_text);
  if (entities.empty()) return out;
  out += " [ENTS: ";
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (i > 0) out += "; ";
    out += entities[i].surface;
    out += '|';
    out += entities[i].entity_label;
  }
  out += ']';
  return out;
}

std::vector<EnrichedSentence> enrich_study(const StudyRecord& record, EnricherBackend& backend) {
  std::vector<EnrichedSentence> out;
  const auto sentences = segment_abstract(record.abstract, backend);
  out.reserve(sentences.size());
  for (const auto& text : sentences) {
    EnrichedSentence s;
    s.study_id = record.study_id;
    s.sentence_index = out.size();
    s.raw_text = text;
    for (auto& m : extract_entities(text, backend)) {
      if (renderable(m)) {
        s.entities.push_back(std::move(m));
      } else {
        spdlog::debug("study {}: skipping unrenderable mention '{}'", record.study_id, m.surface);
      }
    }
    s.enriched_text = render_enriched(s.raw_text, s.entities);
    s.inherited_label = record.label;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<EnrichedSentence> enrich_corpus(std::span<const StudyRecord> records, EnricherBackend& backend) {
  std::vector<std::string> abstracts;
  abstracts.reserve(records.size());
  for (const auto& r : records) abstracts.push_back(r.abstract);
  backend.prefetch(abstracts);
  std::vector<EnrichedSentence> out;
  for (const auto& r : records) {
    auto s = enrich_study(r, backend);
    out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  return out;
}

nlohmann::json to_json(const EnrichedSentence& s) {
  nlohmann::json ents = nlohmann::json::array();
  for (const auto& m : s.entities)
    ents.push_back({{"surface", m.surface}, {"label", m.entity_label}, {"start", m.start}, {"end", m.end}});
  return {{"study_id", s.study_id},     {"sentence_index", s.sentence_index},
          {"raw_text", s.raw_text},     {"entities", ents},
          {"enriched_text", s.enriched_text}, {"inherited_label", to_int(s.inherited_label)}};
}

EnrichedSentence enriched_from_json(const nlohmann::json& j) {
  EnrichedSentence s;
  s.study_id = j.at("study_id").get<std::string>();
  s.sentence_index = j.at("sentence_index").get<std::size_t>();
  s.raw_text = j.value("raw_text", std::string{});
  for (const auto& e : j.value("entities", nlohmann::json::array()))
    s.entities.push_back({e.at("surface").get<std::string>(), e.value("label", std::string("ENTITY")),
                          e.at("start").get<std::size_t>(), e.at("end").get<std::size_t>()});
  s.enriched_text = j.at("enriched_text").get<std::string>();
  s.inherited_label = label_from_bool(j.at("inherited_label").get<int>() != 0);
  return s;
}

void save_enriched(const std::filesystem::path& path, std::span<const EnrichedSentence> sentences) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write '" + tmp + "'");
    for (const auto& s : sentences) out << to_json(s).dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

std::vector<EnrichedSentence> load_enriched(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  std::vector<EnrichedSentence> out;
  std::string line;
  while (std::getline(in, line))
    if (!trim(line).empty()) out.push_back(enriched_from_json(nlohmann::json::parse(line)));
  return out;
}

}  // namespace eq5d
