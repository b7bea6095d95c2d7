// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>

#include "eq5d/backbone.hpp"
#include "eq5d/config.hpp"
#include "eq5d/encoding.hpp"
#include "eq5d/error.hpp"
#include "eq5d/tokenizer.hpp"

using namespace eq5d;

namespace {

const std::filesystem::path kTiny = std::filesystem::path(EQ5D_FIXTURE_DIR) / "tiny_bert";

WordPieceTokenizer tiny_tokenizer() {
  return WordPieceTokenizer(Vocabulary::from_file(kTiny / "vocab.txt"), true, "tiny");
}

std::vector<EncodedSequence> make_sequences(std::size_t n) {
  std::vector<EncodedSequence> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].origin = {"S" + std::to_string(i), i};
  return out;
}

std::vector<Origin> origins_of(const std::vector<std::vector<const EncodedSequence*>>& batches) {
  std::vector<Origin> out;
  for (const auto& b : batches)
    for (const auto* s : b) out.push_back(s->origin);
  return out;
}

}  // namespace

TEST_SUITE("tokenizer") {
  TEST_CASE("word pieces and ids match the reference tokenizer") {
    const auto ref = read_json_file(kTiny / "reference.json");
    const auto tok = tiny_tokenizer();
    const auto max_len = ref.at("max_len").get<std::size_t>();
    for (const auto& c : ref.at("cases")) {
      const auto text = c.at("text").get<std::string>();
      CAPTURE(text);
      CHECK(tok.tokenize_to_strings(text) == c.at("pieces").get<std::vector<std::string>>());
      const auto enc = encode_text(text, tok, max_len);
      const auto ids = c.at("input_ids").get<std::vector<std::int32_t>>();
      REQUIRE(enc.length() == ids.size());
      CHECK(std::equal(ids.begin(), ids.end(), enc.token_ids.begin()));
    }
  }

  TEST_CASE("basic tokenization splits punctuation") {
    CHECK(basic_tokenize("EQ-5D,  Health!", true) == std::vector<std::string>{"eq", "-", "5d", ",", "health", "!"});
    CHECK(basic_tokenize("EQ-5D", false) == std::vector<std::string>{"EQ", "-", "5D"});
    CHECK(basic_tokenize("   ", true).empty());
  }

  TEST_CASE("vocabulary lookups and save") {
    const auto v = Vocabulary::from_file(kTiny / "vocab.txt");
    CHECK(v.size() == 135);
    CHECK(v.pad_id() == 0);
    CHECK(v.unk_id() == 1);
    CHECK(v.cls_id() == 2);
    CHECK(v.sep_id() == 3);
    CHECK(v.find("health") == 25);
    CHECK(v.find("nope") == -1);
    const auto p = std::filesystem::temp_directory_path() / "eq5d_vocab_roundtrip.txt";
    v.save(p);
    CHECK(Vocabulary::from_file(p).fingerprint() == v.fingerprint());
  }

  TEST_CASE("built vocabulary never needs the unknown token on its text") {
    const std::vector<std::string> texts{"EQ-5D was used.", "Zebra quality [ENTS: EQ-5D|ENTITY]", "x"};
    const auto v = Vocabulary::build(texts, true, 3);
    WordPieceTokenizer tok(v, true, "built");
    for (const auto& t : texts) {
      const auto ids = tok.tokenize(t);
      CHECK(std::find(ids.begin(), ids.end(), v.unk_id()) == ids.end());
    }
    CHECK(v.find("[PAD]") == 0);
  }
}

TEST_SUITE("encoding") {
  TEST_CASE("empty sentence is special tokens and padding") {
    const auto tok = tiny_tokenizer();
    const auto e = encode_text("", tok, 256);
    CHECK(e.token_ids.size() == 256);
    CHECK(e.length() == 2);
    CHECK(std::accumulate(e.attention_mask.begin(), e.attention_mask.end(), 0) == 2);
    CHECK(e.token_ids[0] == 2);
    CHECK(e.token_ids[1] == 3);
    CHECK(e.token_ids[2] == 0);
  }

  TEST_CASE("long sentence is truncated from the tail") {
    const auto tok = tiny_tokenizer();
    std::string text;
    for (int i = 0; i < 600; ++i) text += (i % 2 ? "health " : "eq ");
    REQUIRE(tok.tokenize(text).size() == 600);
    const auto e = encode_text(text, tok, 256);
    CHECK(e.token_ids.size() == 256);
    CHECK(e.attention_mask.size() == 256);
    CHECK(std::all_of(e.attention_mask.begin(), e.attention_mask.end(), [](auto m) { return m == 1; }));
    CHECK(e.token_ids[1] == tok.vocab().find("eq"));
    CHECK(e.token_ids[255] == 3);
  }

  TEST_CASE("identical sentences encode identically") {
    const auto tok = tiny_tokenizer();
    const auto a = encode_text("EQ-5D was used.", tok, 32, Label::positive, {"A", 0});
    const auto b = encode_text("EQ-5D was used.", tok, 32, Label::positive, {"B", 3});
    CHECK(a.token_ids == b.token_ids);
    CHECK(a.attention_mask == b.attention_mask);
    CHECK(a.tokenizer_id == "tiny");
  }

  TEST_CASE("mask is a prefix and padding matches it") {
    const auto tok = tiny_tokenizer();
    for (const std::string t : {"", "a", "EQ-5D was used. [ENTS: EQ-5D|ENTITY]", "the the the the the the the"}) {
      const auto e = encode_text(t, tok, 12);
      REQUIRE(e.token_ids.size() == 12);
      bool seen_zero = false;
      for (std::size_t i = 0; i < 12; ++i) {
        if (e.attention_mask[i] == 0) seen_zero = true;
        CHECK((seen_zero ? e.attention_mask[i] == 0 : e.attention_mask[i] == 1));
        if (i >= 1) CHECK((e.token_ids[i] == tok.vocab().pad_id()) == (e.attention_mask[i] == 0));
      }
    }
  }

  TEST_CASE("encode carries labels and origins") {
    const auto tok = tiny_tokenizer();
    std::vector<EnrichedSentence> s(2);
    s[0] = {"S1", 0, "a", {}, "a", Label::positive};
    s[1] = {"S1", 1, "b", {}, "b", Label::positive};
    const auto e = encode(s, tok, 16);
    REQUIRE(e.size() == 2);
    CHECK(e[1].origin == Origin{"S1", 1});
    CHECK(e[1].label == Label::positive);
    CHECK(e[0].token_ids.size() == 16);
  }

  TEST_CASE("eval batches keep input order") {
    const auto seqs = make_sequences(33);
    const auto batches = iterate_batches(seqs, {16}, Regime::eval, 0);
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].size() == 16);
    CHECK(batches[1].size() == 16);
    CHECK(batches[2].size() == 1);
    const auto o = origins_of(batches);
    for (std::size_t i = 0; i < o.size(); ++i) CHECK(o[i].sentence_index == i);
  }

  TEST_CASE("train batches permute per epoch seed") {
    const auto seqs = make_sequences(33);
    auto a = origins_of(iterate_batches(seqs, {16}, Regime::train, epoch_seed(5, 1)));
    auto b = origins_of(iterate_batches(seqs, {16}, Regime::train, epoch_seed(5, 2)));
    const auto a2 = origins_of(iterate_batches(seqs, {16}, Regime::train, epoch_seed(5, 1)));
    CHECK(a == a2);
    CHECK(a != b);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
    CHECK(a.size() == 33);
  }

  TEST_CASE("every sequence appears once per epoch") {
    for (std::size_t n : {1u, 7u, 16u, 17u, 100u}) {
      const auto seqs = make_sequences(n);
      for (auto regime : {Regime::train, Regime::eval}) {
        BatchStream stream(n, {5}, regime, 99);
        std::vector<std::size_t> seen;
        while (auto batch = stream.next()) seen.insert(seen.end(), batch->begin(), batch->end());
        std::sort(seen.begin(), seen.end());
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        CHECK(seen == all);
        CHECK(stream.batch_count() == (n + 4) / 5);
      }
    }
  }

  TEST_CASE("empty input is rejected") {
    std::vector<EncodedSequence> none;
    CHECK_THROWS_AS(iterate_batches(none, {16}, Regime::eval, 0), ValidationError);
  }

  TEST_CASE("epoch seeds differ") {
    CHECK(epoch_seed(1, 0) != epoch_seed(1, 1));
    CHECK(epoch_seed(1, 0) != epoch_seed(2, 0));
    CHECK(epoch_seed(1, 3) == epoch_seed(1, 3));
  }
}
