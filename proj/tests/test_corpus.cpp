// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "eq5d/corpus.hpp"
#include "eq5d/error.hpp"
#include "eq5d/rng.hpp"

using namespace eq5d;

namespace {

std::vector<StudyRecord> make_corpus(std::size_t n, std::size_t positives, std::uint64_t seed = 3) {
  std::vector<StudyRecord> out;
  Rng rng(seed);
  std::vector<int> labels(n, 0);
  for (std::size_t i = 0; i < positives; ++i) labels[i] = 1;
  rng.shuffle(std::span<int>(labels));
  for (std::size_t i = 0; i < n; ++i) {
    StudyRecord r;
    r.study_id = "id" + std::to_string(1000 + i);
    r.title = "t";
    r.abstract = "Abstract " + std::to_string(i) + ".";
    r.label = label_from_bool(labels[i] == 1);
    out.push_back(r);
  }
  return out;
}

double positive_rate(std::span<const StudyRecord> all, const std::vector<std::string>& ids) {
  const std::set<std::string> s(ids.begin(), ids.end());
  std::size_t pos = 0;
  for (const auto& r : all)
    if (s.count(r.study_id) && r.label == Label::positive) ++pos;
  return static_cast<double>(pos) / static_cast<double>(ids.size());
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("labels parse from the accepted spellings only") {
    CHECK(parse_label("1", "s") == Label::positive);
    CHECK(parse_label("0", "s") == Label::negative);
    CHECK(parse_label("TRUE", "s") == Label::positive);
    CHECK(parse_label("false", "s") == Label::negative);
    CHECK(parse_label("1.0", "s") == Label::positive);
    CHECK(parse_label("0.0", "s") == Label::negative);
    CHECK_THROWS_AS(parse_label("yes", "s"), IngestionError);
    CHECK_THROWS_AS(parse_label("2", "s"), IngestionError);
  }

  TEST_CASE("csv corpus loads, drops blank abstracts and counts them") {
    std::istringstream in(
        "study_id,title,abstract,keywords,label\n"
        "A,T1,\"First, sentence. Second.\",eq5d;qol,1\n"
        "B,T2,,x,0\n"
        "C,T3,nan,x,0\n"
        "D,T4,Body text.,,0\n");
    const auto c = parse_corpus(in, CorpusFormat::csv);
    REQUIRE(c.records.size() == 2);
    CHECK(c.dropped == 2);
    CHECK(c.dropped_ids == std::vector<std::string>{"B", "C"});
    CHECK(c.records[0].abstract == "First, sentence. Second.");
    CHECK(c.records[0].keywords == std::vector<std::string>{"eq5d", "qol"});
    CHECK(c.records[0].label == Label::positive);
    CHECK(c.records[1].keywords.empty());
  }

  TEST_CASE("malformed corpora are fatal") {
    std::istringstream missing_col("study_id,title,abstract,label\nA,T,x,1\n");
    CHECK_THROWS_AS(parse_corpus(missing_col, CorpusFormat::csv), IngestionError);
    std::istringstream dup("study_id,title,abstract,keywords,label\nA,T,x,,1\nA,T,y,,0\n");
    CHECK_THROWS_AS(parse_corpus(dup, CorpusFormat::csv), IngestionError);
    std::istringstream bad_label("study_id,title,abstract,keywords,label\nA,T,x,,maybe\n");
    CHECK_THROWS_AS(parse_corpus(bad_label, CorpusFormat::csv), IngestionError);
    CHECK_THROWS_AS(load_corpus("/nonexistent.csv", CorpusFormat::csv), IngestionError);
  }

  TEST_CASE("jsonl corpus accepts arrays and booleans") {
    std::istringstream in(
        R"({"study_id":"X","title":"t","abstract":"A b.","keywords":["k1","k2"],"label":true})"
        "\n"
        R"({"study_id":"Y","title":"t","abstract":"C d.","keywords":"k3;k4","label":"0"})"
        "\n");
    const auto c = parse_corpus(in, CorpusFormat::jsonl);
    REQUIRE(c.records.size() == 2);
    CHECK(c.records[0].label == Label::positive);
    CHECK(c.records[1].keywords == std::vector<std::string>{"k3", "k4"});
  }

  TEST_CASE("jsonl write and load round-trip") {
    const auto recs = make_corpus(10, 4);
    const auto path = std::filesystem::temp_directory_path() / "eq5d_corpus_rt.jsonl";
    write_corpus_jsonl(path, recs);
    const auto back = load_corpus(path, guess_corpus_format(path));
    REQUIRE(back.records.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      CHECK(back.records[i].study_id == recs[i].study_id);
      CHECK(back.records[i].abstract == recs[i].abstract);
      CHECK(back.records[i].label == recs[i].label);
    }
    std::filesystem::remove(path);
  }

  TEST_CASE("partition sizes") {
    const auto p = partition_sizes(200);
    CHECK(p.train == 140);
    CHECK(p.val == 30);
    CHECK(p.test == 30);
    const auto q = partition_sizes(11);
    CHECK(q.train + q.val + q.test == 11);
    CHECK(q.test >= q.val);
    const auto tiny = partition_sizes(4);
    CHECK(tiny.train == 2);
    CHECK(tiny.val == 1);
    CHECK(tiny.test == 1);
  }

  TEST_CASE("splits are disjoint, exhaustive, stratified and reproducible") {
    const auto recs = make_corpus(200, 79);
    const double global = 79.0 / 200.0;
    for (std::uint64_t seed : {0ULL, 1ULL, 17ULL, 123456789ULL}) {
      const auto s = split_corpus(recs, seed);
      CHECK(s.train_ids.size() == 140);
      CHECK(s.val_ids.size() == 30);
      CHECK(s.test_ids.size() == 30);
      std::set<std::string> all;
      for (const auto* part : {&s.train_ids, &s.val_ids, &s.test_ids}) {
        all.insert(part->begin(), part->end());
        CHECK(std::abs(positive_rate(recs, *part) - global) <= 1.0 / static_cast<double>(part->size()) + 1e-12);
      }
      CHECK(all.size() == 200);
      CHECK(split_corpus(recs, seed) == s);
    }
    CHECK(!(split_corpus(recs, 1) == split_corpus(recs, 2)));
  }

  TEST_CASE("split ignores input order") {
    auto recs = make_corpus(50, 20);
    const auto a = split_corpus(recs, 9);
    std::reverse(recs.begin(), recs.end());
    CHECK(split_corpus(recs, 9) == a);
  }

  TEST_CASE("split persistence round-trips") {
    const auto recs = make_corpus(30, 10);
    const auto s = split_corpus(recs, 4);
    CHECK(split_from_json(split_to_json(s)) == s);
    const auto path = std::filesystem::temp_directory_path() / "eq5d_split.json";
    save_split(path, s);
    CHECK(load_split(path) == s);
    std::filesystem::remove(path);
  }

  TEST_CASE("tiny corpora are rejected") {
    const auto recs = make_corpus(3, 1);
    CHECK_THROWS_AS(split_corpus(recs, 1), ValidationError);
  }

  TEST_CASE("select_records keeps id order and rejects unknown ids") {
    const auto recs = make_corpus(5, 2);
    const std::vector<std::string> ids = {recs[3].study_id, recs[1].study_id};
    const auto sel = select_records(recs, ids);
    REQUIRE(sel.size() == 2);
    CHECK(sel[0].study_id == recs[3].study_id);
    const std::vector<std::string> bad = {"nope"};
    CHECK_THROWS(select_records(recs, bad));
  }
}
