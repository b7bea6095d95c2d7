// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdio>
#include <cstring>

#include "eq5d/backbone.hpp"
#include "eq5d/error.hpp"
#include "eq5d/evaluation.hpp"
#include "eq5d/mil.hpp"
#include "eq5d/rng.hpp"
#include "eq5d/synthetic.hpp"

using namespace eq5d;

namespace {

struct BagData {
  Backbone backbone;
  std::vector<EnrichedSentence> test_sentences;
  std::vector<Bag> train, val, test;
};

const BagData& bag_data() {
  static const BagData d = [] {
    const auto corpus = synthetic_corpus(SyntheticSpec{});
    const auto split = split_corpus(corpus, 11);
    RegexBackend enricher({"EQ-5D(-[35]L)?"});
    auto part = [&](const std::vector<std::string>& ids) {
      const auto recs = select_records(corpus, ids);
      return enrich_corpus(recs, enricher);
    };
    const auto tr = part(split.train_ids), va = part(split.val_ids);
    BagData out;
    out.test_sentences = part(split.test_ids);
    std::vector<std::string> texts;
    for (const auto& s : tr) texts.push_back(s.enriched_text);
    out.backbone = make_random_backbone("mini", BackboneConfig{}, texts);
    const auto& tok = *out.backbone.tokenizer;
    out.train = make_bags(encode(tr, tok, 64));
    out.val = make_bags(encode(va, tok, 64));
    out.test = make_bags(encode(out.test_sentences, tok, 64));
    return out;
  }();
  return d;
}

TrainConfig mil_config(std::size_t epochs = 20) {
  TrainConfig c;
  c.backbone_id = "mini";
  c.learning_rate = 1e-3;
  c.max_len = 64;
  c.max_epochs = epochs;
  c.seed = 11;
  return c;
}

EncodedSequence seq(std::string study, std::size_t index, Label label) {
  EncodedSequence s;
  s.origin = {std::move(study), index};
  s.label = label;
  s.token_ids = {2, 3};
  s.attention_mask = {1, 1};
  return s;
}

}  // namespace

TEST_SUITE("mil") {
  TEST_CASE("bags group by study and order by sentence") {
    std::vector<EncodedSequence> s{seq("B", 1, Label::negative), seq("A", 0, Label::positive),
                                   seq("B", 0, Label::negative), seq("A", 2, Label::positive),
                                   seq("A", 1, Label::positive)};
    const auto bags = make_bags(s);
    REQUIRE(bags.size() == 2);
    CHECK(bags[0].study_id == "A");
    CHECK(bags[0].label == Label::positive);
    REQUIRE(bags[0].instances.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(bags[0].instances[i].origin.sentence_index == i);
    CHECK(make_bags(s, 2)[0].instances.size() == 2);
    s.push_back(seq("B", 2, Label::positive));
    CHECK_THROWS_AS(make_bags(s), ValidationError);
  }

  TEST_CASE("bags per step follow the sentence batch size") {
    std::vector<Bag> bags(3);
    bags[0].instances.resize(2);
    bags[1].instances.resize(2);
    bags[2].instances.resize(4);
    CHECK(bags_per_batch(bags, 16) == 6);
    bags[2].instances.resize(60);
    CHECK(bags_per_batch(bags, 16) == 1);
  }

  TEST_CASE("training learns bag labels and attends to the marker") {
    const auto& d = bag_data();
    const auto [model, history] = mil_train(d.backbone, d.train, d.val, mil_config());
    CHECK(model.network->has_attention_pool());
    std::vector<LabeledPrediction> items;
    std::size_t positives = 0, hits = 0;
    std::uint64_t digest = 0xcbf29ce484222325ULL;
    for (const auto& bag : d.test) {
      const auto p = mil_predict(model, bag);
      items.push_back({bag.label, p.predicted_label});
      CHECK(std::abs(p.p_positive + p.p_negative - 1.0) < 1e-12);
      double total = 0.0;
      for (double a : p.attention_weights) total += a;
      CHECK(std::abs(total - 1.0) < 1e-9);
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s:%.4f;", p.study_id.c_str(), p.p_positive);
      digest = fnv1a64(buf, std::strlen(buf), digest);
      if (bag.label != Label::positive) continue;
      ++positives;
      std::size_t best = 0;
      for (std::size_t i = 1; i < p.attention_weights.size(); ++i)
        if (p.attention_weights[i] > p.attention_weights[best]) best = i;
      for (const auto& s : d.test_sentences)
        if (s.study_id == bag.study_id && s.sentence_index == bag.instances[best].origin.sentence_index)
          hits += is_marker_sentence(s.raw_text);
    }
    const auto m = compute_metrics(items, Level::bag);
    CHECK(m.f1 >= 0.95);
    CHECK(static_cast<double>(hits) >= 0.9 * static_cast<double>(positives));
    // Frozen from the first run of this configuration.
    CHECK(hex64(digest) == "4bf45384098b2dc3");
  }

  TEST_CASE("singleton bag pools to its own embedding") {
    const auto& d = bag_data();
    const auto [model, history] = mil_train(d.backbone, std::span(d.train).first(8), std::span(d.val).first(8),
                                            mil_config(1));
    Bag single{d.test[0].study_id, {d.test[0].instances[0]}, d.test[0].label};
    const auto p = mil_predict(model, single);
    REQUIRE(p.attention_weights.size() == 1);
    CHECK(p.attention_weights[0] == 1.0);
    const nn::Matrix h = embed_instances(model, single);
    const nn::Matrix logits = model.network->head(nn::Var(h)).value();
    const nn::Matrix probs = nn::softmax_rows(logits);
    CHECK(p.p_positive == doctest::Approx(probs(0, 1)).epsilon(1e-12));
  }

  TEST_CASE("prediction is invariant to instance order") {
    const auto& d = bag_data();
    const auto [model, history] = mil_train(d.backbone, std::span(d.train).first(8), std::span(d.val).first(8),
                                            mil_config(1));
    Rng rng(4);
    for (const auto& bag : std::span(d.test).first(10)) {
      Bag shuffled = bag;
      rng.shuffle(std::span<EncodedSequence>(shuffled.instances));
      CHECK(mil_predict(model, shuffled).p_positive == doctest::Approx(mil_predict(model, bag).p_positive).epsilon(1e-9));
    }
  }

  TEST_CASE("sentence models cannot predict bags") {
    const auto& d = bag_data();
    TrainedModel m;
    m.backbone = d.backbone;
    m.network = std::make_shared<ClassifierNetwork>(d.backbone, 1, false);
    CHECK_THROWS_AS(mil_predict(m, d.test[0]), ConfigError);
  }

  TEST_CASE("bag predictions round trip") {
    std::vector<BagPrediction> p{{"A", 0.75, 0.25, Label::positive, {0.5, 0.5}}, {"B", 0.1, 0.9, Label::negative, {1.0}}};
    const auto path = std::filesystem::temp_directory_path() / "eq5d_bag_preds.jsonl";
    save_bag_predictions(path, p);
    const auto back = load_bag_predictions(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].attention_weights == p[0].attention_weights);
    CHECK(back[1].predicted_label == Label::negative);
  }
}
