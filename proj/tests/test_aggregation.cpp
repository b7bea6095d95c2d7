// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <map>
#include <numeric>

#include "eq5d/aggregation.hpp"
#include "eq5d/error.hpp"
#include "eq5d/rng.hpp"

using namespace eq5d;

namespace {

PredictionRecord rec(std::string id, std::size_t idx, double pos) {
  return {std::move(id), idx, pos, 1.0 - pos, max_confidence_label(pos, 1.0 - pos)};
}

// Sums with integer numerators over a common denominator so the oracle is exact.
struct Oracle {
  double mean_pos;
  Label label;
};

Oracle oracle(const std::vector<int>& numerators, int denom) {
  long long sum = 0;
  for (int n : numerators) sum += n;
  const long long k = static_cast<long long>(numerators.size());
  // mean_pos >= mean_neg  <=>  2*sum >= k*denom
  return {static_cast<double>(sum) / static_cast<double>(k * denom),
          2 * sum >= k * denom ? Label::positive : Label::negative};
}

}  // namespace

TEST_SUITE("aggregation") {
  TEST_CASE("single sentence") {
    const std::vector<PredictionRecord> p{rec("A", 0, 0.9)};
    const auto s = aggregate_study(p);
    CHECK(s.mean_p_positive == doctest::Approx(0.9));
    CHECK(s.mean_p_negative == doctest::Approx(0.1));
    CHECK(s.predicted_label == Label::positive);
    CHECK(s.n_sentences == 1);
  }

  TEST_CASE("two sentences average to negative") {
    const std::vector<PredictionRecord> p{rec("A", 0, 0.6), rec("A", 1, 0.2)};
    const auto s = aggregate_study(p);
    CHECK(s.mean_p_positive == doctest::Approx(0.4));
    CHECK(s.mean_p_negative == doctest::Approx(0.6));
    CHECK(s.predicted_label == Label::negative);
  }

  TEST_CASE("exact tie goes positive") {
    const std::vector<PredictionRecord> p{rec("A", 0, 0.7), rec("A", 1, 0.3)};
    const auto s = aggregate_study(p);
    CHECK(s.mean_p_positive == doctest::Approx(0.5));
    CHECK(s.predicted_label == Label::positive);
    CHECK(max_confidence_label(0.5, 0.5) == Label::positive);
    CHECK(max_confidence_label(0.5 - 1e-13, 0.5 + 1e-13) == Label::positive);
    CHECK(max_confidence_label(0.49, 0.51) == Label::negative);
  }

  TEST_CASE("errors") {
    std::vector<PredictionRecord> none;
    CHECK_THROWS_AS(aggregate_study(none), ValidationError);
    const std::vector<PredictionRecord> mixed{rec("A", 0, 0.6), rec("B", 0, 0.2)};
    CHECK_THROWS_AS(aggregate_study(mixed), ValidationError);
    std::vector<PredictionRecord> bad{rec("A", 0, 0.6)};
    bad[0].p_negative = 0.6;
    CHECK_THROWS_AS(aggregate_study(bad), ValidationError);
  }

  TEST_CASE("corpus grouping is ordered and order independent") {
    CHECK(aggregate_corpus({}).empty());
    std::vector<PredictionRecord> p{rec("C", 0, 0.9), rec("A", 0, 0.1), rec("B", 1, 0.4),
                                    rec("A", 1, 0.3), rec("B", 0, 0.8), rec("C", 1, 0.2)};
    const auto sorted = aggregate_corpus(p);
    REQUIRE(sorted.size() == 3);
    CHECK(sorted[0].study_id == "A");
    CHECK(sorted[2].study_id == "C");
    Rng rng(2);
    for (int i = 0; i < 20; ++i) {
      rng.shuffle(std::span<PredictionRecord>(p));
      CHECK(aggregate_corpus(p) == sorted);
    }
  }

  TEST_CASE("permutation invariance and mean bounds") {
    Rng rng(11);
    for (int trial = 0; trial < 300; ++trial) {
      const auto n = 1 + rng.below(8);
      std::vector<PredictionRecord> p;
      double lo = 1.0, hi = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double pos = rng.uniform();
        lo = std::min(lo, pos);
        hi = std::max(hi, pos);
        p.push_back(rec("S", i, pos));
      }
      const auto a = aggregate_study(p);
      rng.shuffle(std::span<PredictionRecord>(p));
      const auto b = aggregate_study(p);
      CHECK(a == b);
      CHECK(a.mean_p_positive >= lo - 1e-15);
      CHECK(a.mean_p_positive <= hi + 1e-15);
      CHECK(std::abs(a.mean_p_positive + a.mean_p_negative - 1.0) < 1e-6);
    }
  }

  TEST_CASE("matches an exact rational oracle") {
    Rng rng(23);
    const int denom = 8;
    std::size_t ties = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const auto n = 1 + rng.below(8);
      std::vector<int> nums;
      std::vector<PredictionRecord> p;
      for (std::size_t i = 0; i < n; ++i) {
        nums.push_back(static_cast<int>(rng.below(denom + 1)));
        p.push_back(rec("S", i, nums.back() / static_cast<double>(denom)));
      }
      const auto o = oracle(nums, denom);
      const auto s = aggregate_study(p);
      CHECK(std::abs(s.mean_p_positive - o.mean_pos) <= 1e-12);
      CHECK(s.predicted_label == o.label);
      if (2 * std::accumulate(nums.begin(), nums.end(), 0) == static_cast<int>(n) * denom) ++ties;
    }
    CHECK(ties > 20);
  }

  TEST_CASE("prediction files round trip") {
    const std::vector<PredictionRecord> p{rec("A", 0, 0.25), rec("A", 1, 0.75)};
    const auto dir = std::filesystem::temp_directory_path() / "eq5d_tests";
    std::filesystem::create_directories(dir);
    save_predictions(dir / "preds.jsonl", p);
    const auto back = load_predictions(dir / "preds.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[1].p_positive == 0.75);
    CHECK(back[1].predicted_label == Label::positive);
    const auto studies = aggregate_corpus(p);
    save_study_predictions(dir / "study.jsonl", studies);
    CHECK(load_study_predictions(dir / "study.jsonl") == studies);
  }
}
