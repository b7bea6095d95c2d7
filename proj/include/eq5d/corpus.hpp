// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace eq5d {

/// Binary study class. Positive means the study mentions/uses EQ-5D.
enum class Label : std::uint8_t { negative = 0, positive = 1 };

constexpr int to_int(Label l) { return static_cast<int>(l); }
constexpr Label label_from_bool(bool positive) { return positive ? Label::positive : Label::negative; }

/// Accepts 1/0, true/false (any case) and the float renderings 1.0/0.0.
/// Throws IngestionError naming `study_id` for anything else.
Label parse_label(std::string_view text, std::string_view study_id);

struct StudyRecord {
  std::string study_id;
  std::string title;
  std::string abstract;
  std::vector<std::string> keywords;
  Label label = Label::negative;
};

enum class CorpusFormat { csv, tsv, jsonl };

CorpusFormat parse_corpus_format(std::string_view id);
/// Picks the format from the file extension (.csv, .tsv, .jsonl/.ndjson).
CorpusFormat guess_corpus_format(const std::filesystem::path& path);

struct LoadedCorpus {
  std::vector<StudyRecord> records;
  std::size_t dropped = 0;               // records removed for a missing abstract
  std::vector<std::string> dropped_ids;
};

/// Reads a corpus file. Records whose abstract is missing or blank are dropped
/// and counted; an unreadable file, a missing column, a duplicate id or an
/// unparseable label is fatal (IngestionError).
LoadedCorpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
LoadedCorpus parse_corpus(std::istream& in, CorpusFormat format, std::string_view source = "<stream>");

void write_corpus_jsonl(const std::filesystem::path& path, std::span<const StudyRecord> records);

std::size_t count_positive(std::span<const StudyRecord> records);

struct SplitFractions {
  double train = 0.70;
  double test = 0.30;
  double val_share_of_test = 0.50;
};

/// Study-level, label-stratified partition of a corpus.
struct DatasetSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;
  std::uint64_t seed = 0;
  SplitFractions fractions;

  bool operator==(const DatasetSplit&) const = default;
};

inline bool operator==(const SplitFractions& a, const SplitFractions& b) {
  return a.train == b.train && a.test == b.test && a.val_share_of_test == b.val_share_of_test;
}

/// Partition sizes for a corpus of n studies: train = round(0.7 n) (kept
/// below n - 1 so the held-out partitions are non-empty), the remainder is
/// halved with the odd study going to test.
struct PartitionSizes {
  std::size_t train = 0, val = 0, test = 0;
};
PartitionSizes partition_sizes(std::size_t n);

/// Deterministic in (ids, labels, seed); input order does not matter.
/// Requires at least 4 records.
DatasetSplit split_corpus(std::span<const StudyRecord> records, std::uint64_t seed);

nlohmann::json split_to_json(const DatasetSplit& split);
DatasetSplit split_from_json(const nlohmann::json& j);
void save_split(const std::filesystem::path& path, const DatasetSplit& split);
DatasetSplit load_split(const std::filesystem::path& path);

/// Records whose id is in `ids`, in the order of `ids`. Throws on unknown ids.
std::vector<StudyRecord> select_records(std::span<const StudyRecord> records, std::span<const std::string> ids);

}  // namespace eq5d
