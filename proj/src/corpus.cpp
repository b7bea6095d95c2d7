// SPDX-License-Identifier: Apache-2.0
#include "eq5d/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "eq5d/csv.hpp"
#include "eq5d/error.hpp"
#include "eq5d/rng.hpp"

namespace eq5d {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

bool is_missing(std::string_view text) {
  const std::string t = lower(trim(text));
  return t.empty() || t == "nan" || t == "null" || t == "none" || t == "n/a";
}

std::vector<std::string> split_keywords(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(';', start);
    std::string kw = trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (!kw.empty()) out.push_back(std::move(kw));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

const std::vector<std::string> kColumns = {"study_id", "title", "abstract", "keywords", "label"};

struct Accumulator {
  LoadedCorpus corpus;
  std::set<std::string> seen;
  std::string source;

  void add(StudyRecord rec, std::size_t where) {
    if (rec.study_id.empty()) throw IngestionError(source + ": empty study_id at record " + std::to_string(where));
    if (!seen.insert(rec.study_id).second) throw IngestionError(source + ": duplicate study_id '" + rec.study_id + "'");
    if (is_missing(rec.abstract)) {
      ++corpus.dropped;
      corpus.dropped_ids.push_back(rec.study_id);
      return;
    }
    rec.abstract = trim(rec.abstract);
    corpus.records.push_back(std::move(rec));
  }
};

void parse_delimited(std::istream& in, char delimiter, Accumulator& acc) {
  csv::Reader reader(in, delimiter);
  auto header = reader.next_row();
  if (!header) return;
  if (!header->empty() && header->front().rfind("\xEF\xBB\xBF", 0) == 0) header->front().erase(0, 3);

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header->size(); ++i) col[trim((*header)[i])] = i;
  for (const auto& name : kColumns)
    if (!col.count(name)) throw IngestionError(acc.source + ": missing column '" + name + "'");

  std::size_t index = 0;
  while (auto row = reader.next_row()) {
    ++index;
    if (row->size() == 1 && trim(row->front()).empty()) continue;
    auto field = [&](const std::string& name) -> std::string {
      const auto i = col.at(name);
      return i < row->size() ? (*row)[i] : std::string{};
    };
    StudyRecord rec;
    rec.study_id = trim(field("study_id"));
    rec.title = trim(field("title"));
    rec.abstract = field("abstract");
    rec.keywords = split_keywords(field("keywords"));
    rec.label = parse_label(field("label"), rec.study_id);
    acc.add(std::move(rec), index);
  }
}

std::string json_text(const nlohmann::json& j) {
  if (j.is_null()) return {};
  if (j.is_string()) return j.get<std::string>();
  return j.dump();
}

void parse_jsonl(std::istream& in, Accumulator& acc) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError(acc.source + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object()) throw IngestionError(acc.source + ":" + std::to_string(lineno) + ": record is not an object");
    StudyRecord rec;
    rec.study_id = trim(json_text(j.value("study_id", nlohmann::json{})));
    rec.title = json_text(j.value("title", nlohmann::json{}));
    rec.abstract = json_text(j.value("abstract", nlohmann::json{}));
    if (const auto kw = j.find("keywords"); kw != j.end()) {
      if (kw->is_array()) {
        for (const auto& k : *kw) rec.keywords.push_back(json_text(k));
      } else {
        rec.keywords = split_keywords(json_text(*kw));
      }
    }
    if (!j.contains("label")) throw IngestionError(acc.source + ": record '" + rec.study_id + "' has no label");
    const auto& lab = j["label"];
    if (lab.is_boolean()) {
      rec.label = label_from_bool(lab.get<bool>());
    } else {
      rec.label = parse_label(json_text(lab), rec.study_id);
    }
    acc.add(std::move(rec), lineno);
  }
}

}  // namespace

Label parse_label(std::string_view text, std::string_view study_id) {
  const std::string t = lower(trim(text));
  if (t == "1" || t == "true" || t == "1.0") return Label::positive;
  if (t == "0" || t == "false" || t == "0.0") return Label::negative;
  throw IngestionError("unparseable label '" + std::string(text) + "' for study '" + std::string(study_id) + "'");
}

CorpusFormat parse_corpus_format(std::string_view id) {
  const std::string t = lower(id);
  if (t == "csv") return CorpusFormat::csv;
  if (t == "tsv") return CorpusFormat::tsv;
  if (t == "jsonl" || t == "ndjson") return CorpusFormat::jsonl;
  throw ConfigError("unknown corpus format '" + std::string(id) + "' (expected csv, tsv or jsonl)");
}

CorpusFormat guess_corpus_format(const std::filesystem::path& path) {
  const std::string ext = lower(path.extension().string());
  if (ext == ".tsv" || ext == ".tab") return CorpusFormat::tsv;
  if (ext == ".jsonl" || ext == ".ndjson") return CorpusFormat::jsonl;
  return CorpusFormat::csv;
}

LoadedCorpus parse_corpus(std::istream& in, CorpusFormat format, std::string_view source) {
  Accumulator acc;
  acc.source = std::string(source);
  switch (format) {
    case CorpusFormat::csv: parse_delimited(in, ',', acc); break;
    case CorpusFormat::tsv: parse_delimited(in, '\t', acc); break;
    case CorpusFormat::jsonl: parse_jsonl(in, acc); break;
  }
  if (acc.corpus.dropped > 0)
    spdlog::warn("{}: dropped {} record(s) with a missing abstract", acc.source, acc.corpus.dropped);
  return std::move(acc.corpus);
}

LoadedCorpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open corpus file '" + path.string() + "'");
  return parse_corpus(in, format, path.string());
}

void write_corpus_jsonl(const std::filesystem::path& path, std::span<const StudyRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write '" + path.string() + "'");
  for (const auto& r : records) {
    nlohmann::json j = {{"study_id", r.study_id}, {"title", r.title},   {"abstract", r.abstract},
                        {"keywords", r.keywords}, {"label", to_int(r.label)}};
    out << j.dump() << '\n';
  }
}

std::size_t count_positive(std::span<const StudyRecord> records) {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const StudyRecord& r) { return r.label == Label::positive; }));
}

PartitionSizes partition_sizes(std::size_t n) {
  PartitionSizes s;
  s.train = std::min((7 * n + 5) / 10, n >= 2 ? n - 2 : 0);
  const std::size_t rest = n - s.train;
  s.val = rest / 2;
  s.test = rest - s.val;
  return s;
}

DatasetSplit split_corpus(std::span<const StudyRecord> records, std::uint64_t seed) {
  if (records.size() < 4)
    throw ValidationError("split_corpus needs at least 4 records (got " + std::to_string(records.size()) + ")");

  std::vector<std::string> pos, neg;
  for (const auto& r : records) (r.label == Label::positive ? pos : neg).push_back(r.study_id);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  Rng(derive_seed(seed, 1)).shuffle(std::span(pos));
  Rng(derive_seed(seed, 0)).shuffle(std::span(neg));

  const std::size_t n = records.size();
  const auto sizes = partition_sizes(n);

  // Round-half-up apportionment of positives, clamped to what each class can supply.
  auto apportion = [](std::size_t part, std::size_t pos_avail, std::size_t neg_avail) {
    const std::size_t total = pos_avail + neg_avail;
    std::size_t p = total == 0 ? 0 : (2 * part * pos_avail + total) / (2 * total);
    p = std::min(p, pos_avail);
    if (part - p > neg_avail) p = part - neg_avail;
    return p;
  };
  const std::size_t train_pos = apportion(sizes.train, pos.size(), neg.size());
  const std::size_t train_neg = sizes.train - train_pos;
  const std::size_t val_pos = apportion(sizes.val, pos.size() - train_pos, neg.size() - train_neg);
  const std::size_t val_neg = sizes.val - val_pos;

  DatasetSplit split;
  split.seed = seed;
  auto take = [](const std::vector<std::string>& src, std::size_t from, std::size_t count, std::vector<std::string>& dst) {
    dst.insert(dst.end(), src.begin() + static_cast<std::ptrdiff_t>(from),
               src.begin() + static_cast<std::ptrdiff_t>(from + count));
  };
  take(pos, 0, train_pos, split.train_ids);
  take(neg, 0, train_neg, split.train_ids);
  take(pos, train_pos, val_pos, split.val_ids);
  take(neg, train_neg, val_neg, split.val_ids);
  take(pos, train_pos + val_pos, pos.size() - train_pos - val_pos, split.test_ids);
  take(neg, train_neg + val_neg, neg.size() - train_neg - val_neg, split.test_ids);
  for (auto* ids : {&split.train_ids, &split.val_ids, &split.test_ids}) std::sort(ids->begin(), ids->end());
  return split;
}

nlohmann::json split_to_json(const DatasetSplit& split) {
  return {{"seed", split.seed},
          {"fractions",
           {{"train", split.fractions.train},
            {"test", split.fractions.test},
            {"val_share_of_test", split.fractions.val_share_of_test}}},
          {"train_ids", split.train_ids},
          {"val_ids", split.val_ids},
          {"test_ids", split.test_ids}};
}

DatasetSplit split_from_json(const nlohmann::json& j) {
  DatasetSplit s;
  s.seed = j.at("seed").get<std::uint64_t>();
  const auto& f = j.at("fractions");
  s.fractions = {f.at("train").get<double>(), f.at("test").get<double>(), f.at("val_share_of_test").get<double>()};
  s.train_ids = j.at("train_ids").get<std::vector<std::string>>();
  s.val_ids = j.at("val_ids").get<std::vector<std::string>>();
  s.test_ids = j.at("test_ids").get<std::vector<std::string>>();
  return s;
}

void save_split(const std::filesystem::path& path, const DatasetSplit& split) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write split manifest '" + path.string() + "'");
  out << split_to_json(split).dump(2) << '\n';
}

DatasetSplit load_split(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot read split manifest '" + path.string() + "'");
  return split_from_json(nlohmann::json::parse(in));
}

std::vector<StudyRecord> select_records(std::span<const StudyRecord> records, std::span<const std::string> ids) {
  std::unordered_map<std::string, const StudyRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.study_id, &r);
  std::vector<StudyRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ValidationError("unknown study_id '" + id + "'");
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace eq5d
