// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "eq5d/corpus.hpp"

namespace eq5d {

/// A recognized entity inside one sentence. [start, end) are byte offsets
/// into the sentence and sentence[start, end) == surface.
struct EntityMention {
  std::string surface;
  std::string entity_label = "ENTITY";
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const EntityMention&) const = default;
};

struct EnrichedSentence {
  std::string study_id;
  std::size_t sentence_index = 0;
  std::string raw_text;
  std::vector<EntityMention> entities;
  std::string enriched_text;
  Label inherited_label = Label::negative;

  bool operator==(const EnrichedSentence&) const = default;
};

/// Sentence segmentation plus entity extraction. Instances are not reentrant:
/// use one per worker.
class EnricherBackend {
 public:
  virtual ~EnricherBackend() = default;

  virtual const std::string& id() const = 0;
  /// Pipeline name and version, recorded in run manifests.
  virtual std::string version() const = 0;

  virtual std::vector<std::string> segment(std::string_view abstract) = 0;
  virtual std::vector<EntityMention> extract(std::string_view sentence) = 0;

  /// Optional hint that these abstracts will be segmented next; backends that
  /// pay a per-call startup cost analyse them in one pass.
  virtual void prefetch(std::span<const std::string> /*abstracts*/) {}
};

/// Dependency-free backend: sentences end at a '.' followed by whitespace;
/// entities are the matches of a list of ECMAScript patterns.
class RegexBackend final : public EnricherBackend {
 public:
  explicit RegexBackend(std::vector<std::string> patterns, std::string entity_label = "ENTITY",
                        std::string backend_id = "test_regex");

  const std::string& id() const override { return id_; }
  std::string version() const override;
  std::vector<std::string> segment(std::string_view abstract) override;
  std::vector<EntityMention> extract(std::string_view sentence) override;

  const std::vector<std::string>& patterns() const { return patterns_; }

 private:
  std::string id_;
  std::string label_;
  std::vector<std::string> patterns_;
  std::vector<std::regex> compiled_;
};

/// Binding of a backend id to an external NLP pipeline driven through a
/// JSON-lines bridge process.
struct PipelineBinding {
  std::string backend_id;
  std::string pipeline;
  std::string version;
  std::vector<std::string> command;
};

/// Runs the bridge command once per batch of texts.
///
/// Request (stdin), one object per line: {"id": "...", "text": "..."}.
/// Response (stdout), one object per line, same order:
///   {"id": "...", "sentences": [{"text": "...", "entities":
///       [{"start": s, "end": e, "label": "ENTITY"}, ...]}, ...]}
/// Offsets are relative to the sentence text. `--mode sentence` asks the
/// bridge to treat every text as a single sentence; `--check` must exit 0 and
/// print {"pipeline": ..., "version": ...} when the pipeline is installed.
class ExternalPipelineBackend final : public EnricherBackend {
 public:
  /// Throws ConfigError naming the backend id if the check call fails.
  explicit ExternalPipelineBackend(PipelineBinding binding);

  const std::string& id() const override { return binding_.backend_id; }
  std::string version() const override { return reported_version_; }
  std::vector<std::string> segment(std::string_view abstract) override;
  std::vector<EntityMention> extract(std::string_view sentence) override;
  void prefetch(std::span<const std::string> abstracts) override;

 private:
  struct Sentence {
    std::string text;
    std::vector<EntityMention> entities;
  };
  std::vector<std::vector<Sentence>> run(std::span<const std::string> texts, bool sentence_mode);

  PipelineBinding binding_;
  std::string reported_version_;
  std::unordered_map<std::string, std::vector<std::string>> segment_memo_;
  std::unordered_map<std::string, std::vector<EntityMention>> entity_memo_;
};

/// Backend id → binding, loaded from the "enrichers" block of the bindings
/// configuration file.
class EnricherRegistry {
 public:
  static EnricherRegistry from_json(const nlohmann::json& j);
  static EnricherRegistry load(const std::filesystem::path& path);

  std::vector<std::string> ids() const;
  bool contains(std::string_view id) const;
  /// Throws ConfigError for unknown ids or unavailable pipelines.
  std::unique_ptr<EnricherBackend> create(std::string_view id) const;

 private:
  struct Entry {
    std::string kind;  // "regex" or "external"
    PipelineBinding binding;
    std::vector<std::string> patterns;
    std::string entity_label = "ENTITY";
  };
  std::map<std::string, Entry, std::less<>> entries_;
};

std::vector<std::string> segment_abstract(std::string_view abstract, EnricherBackend& backend);

/// Mentions sorted by (start, end); repeated surfaces are kept.
std::vector<EntityMention> extract_entities(std::string_view sentence, EnricherBackend& backend);

/// Throws ValidationError if a mention is out of range, does not match the
/// sentence text, or contains a character that would make the suffix
/// ambiguous ('|', "; ", ']').
void validate_mentions(std::string_view raw_text, std::span<const EntityMention> entities);

/// raw_text unchanged when there are no mentions, otherwise
/// raw_text + " [ENTS: " + "surface|label" items joined by "; " + "]".
std::string render_enriched(std::string_view raw_text, std::span<const EntityMention> entities);

/// Sentences of one study, indices dense from 0, each inheriting the study label.
std::vector<EnrichedSentence> enrich_study(const StudyRecord& record, EnricherBackend& backend);
std::vector<EnrichedSentence> enrich_corpus(std::span<const StudyRecord> records, EnricherBackend& backend);

nlohmann::json to_json(const EnrichedSentence& s);
EnrichedSentence enriched_from_json(const nlohmann::json& j);
/// One JSON record per sentence.
void save_enriched(const std::filesystem::path& path, std::span<const EnrichedSentence> sentences);
std::vector<EnrichedSentence> load_enriched(const std::filesystem::path& path);

}  // namespace eq5d
