// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "eq5d/baselines.hpp"
#include "eq5d/error.hpp"

using namespace eq5d;

namespace {

StudyRecord doc(std::string id, std::string text, Label label) { return {std::move(id), "", std::move(text), {}, label}; }

std::size_t column(const BowModel& m, const std::string& token) { return m.vocabulary.at(token); }

}  // namespace

TEST_SUITE("baselines") {
  TEST_CASE("tokenizer") {
    CHECK(bow_tokenize("EQ-5D, Quality of life!") == std::vector<std::string>{"eq", "5d", "quality", "of", "life"});
    CHECK(bow_tokenize("  ").empty());
  }

  TEST_CASE("two-document example") {
    const std::vector<StudyRecord> train{doc("a", "eq5d good", Label::positive), doc("b", "other bad", Label::negative)};
    const auto m = bow_train(train, 1.0);
    CHECK(m.vocabulary.size() == 4);
    CHECK(std::exp(m.log_prior(Label::positive)) == doctest::Approx(0.5));
    CHECK(std::exp(m.log_likelihood(Label::positive, column(m, "eq5d"))) == doctest::Approx(2.0 / 6.0));
    CHECK(std::exp(m.log_likelihood(Label::negative, column(m, "eq5d"))) == doctest::Approx(1.0 / 6.0));
    CHECK(bow_predict(m, "eq5d good").label == Label::positive);
    CHECK(bow_predict(m, "other bad").label == Label::negative);
    CHECK(bow_predict(m, "").label == Label::positive);
    CHECK(bow_predict(m, "never seen").label == Label::positive);
  }

  TEST_CASE("likelihoods are normalised per class") {
    const std::vector<StudyRecord> train{doc("a", "x y y z", Label::positive), doc("b", "z w", Label::negative),
                                         doc("c", "w w q", Label::negative)};
    const auto m = bow_train(train, 0.5);
    for (auto c : {Label::negative, Label::positive}) {
      double s = 0.0;
      for (const auto& [tok, col] : m.vocabulary) s += std::exp(m.log_likelihood(c, col));
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("matches a reference multinomial implementation") {
    const std::vector<StudyRecord> train{doc("1", "EQ-5D was used in this trial.", Label::positive),
                                         doc("2", "Quality of life improved; EQ-5D-5L scores rose.", Label::positive),
                                         doc("3", "Blood pressure fell in the treated arm.", Label::negative),
                                         doc("4", "No change in HbA1c was seen.", Label::negative),
                                         doc("5", "Pain scores improved after surgery.", Label::negative)};
    const auto m = bow_train(train, 1.0);
    CHECK(m.vocabulary.size() == 27);
    struct Case {
      const char* text;
      double neg, pos;
      Label label;
    };
    const Case cases[] = {{"EQ-5D pain", -11.237665912517004, -10.002666501618622, Label::positive},
                          {"treated arm improved", -9.851371551397113, -11.506743898394896, Label::negative},
                          {"unseen words only", -0.5108256237659905, -0.916290731874155, Label::negative}};
    for (const auto& c : cases) {
      const auto s = bow_predict(m, c.text);
      CHECK(s.log_negative == doctest::Approx(c.neg).epsilon(1e-12));
      CHECK(s.log_positive == doctest::Approx(c.pos).epsilon(1e-12));
      CHECK(s.label == c.label);
    }
  }

  TEST_CASE("training errors") {
    const std::vector<StudyRecord> both{doc("a", "x", Label::positive), doc("b", "y", Label::negative)};
    CHECK_THROWS_AS(bow_train(both, 0.0), ValidationError);
    CHECK_THROWS_AS(bow_train(both, -1.0), ValidationError);
    const std::vector<StudyRecord> one{doc("a", "x", Label::positive), doc("b", "y", Label::positive)};
    CHECK_THROWS_AS(bow_train(one, 1.0), ValidationError);
    CHECK_THROWS_AS(bow_train({}, 1.0), ValidationError);
  }

  TEST_CASE("duplicating training documents scales the counts") {
    const std::vector<StudyRecord> base{doc("a", "eq good good", Label::positive), doc("b", "bad other", Label::negative)};
    std::vector<StudyRecord> doubled = base;
    doubled.push_back(doc("c", "eq good good", Label::positive));
    doubled.push_back(doc("d", "bad other", Label::negative));
    const auto a = bow_train(base, 1.0), b = bow_train(doubled, 1.0);
    CHECK(a.vocabulary == b.vocabulary);
    for (int c = 0; c < 2; ++c) {
      CHECK(b.n_docs[c] == 2 * a.n_docs[c]);
      CHECK(b.total_counts[c] == 2 * a.total_counts[c]);
      for (std::size_t i = 0; i < a.counts[c].size(); ++i) CHECK(b.counts[c][i] == 2 * a.counts[c][i]);
    }
  }

  TEST_CASE("label is invariant to repeating the query under equal priors") {
    const std::vector<StudyRecord> train{doc("a", "eq good", Label::positive), doc("b", "bad other eq", Label::negative),
                                         doc("c", "bad", Label::negative), doc("d", "good eq eq", Label::positive)};
    const auto m = bow_train(train, 1.0);
    for (const std::string q : {"eq", "good bad", "other eq eq", "bad"}) {
      const auto once = bow_predict(m, q);
      const auto thrice = bow_predict(m, q + " " + q + " " + q);
      CHECK(once.label == thrice.label);
    }
  }

  TEST_CASE("json round trip is deterministic") {
    const std::vector<StudyRecord> train{doc("a", "eq good", Label::positive), doc("b", "bad other", Label::negative)};
    const auto m = bow_train(train, 1.0);
    const auto back = bow_model_from_json(to_json(m));
    CHECK(to_json(back) == to_json(m));
    CHECK(to_json(bow_train(train, 1.0)) == to_json(m));
    CHECK(bow_predict(back, "eq").log_positive == bow_predict(m, "eq").log_positive);
  }
}
