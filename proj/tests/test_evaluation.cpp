// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "eq5d/error.hpp"
#include "eq5d/evaluation.hpp"
#include "eq5d/rng.hpp"

using namespace eq5d;

namespace {

std::vector<LabeledPrediction> from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  std::vector<LabeledPrediction> out;
  out.insert(out.end(), tp, {Label::positive, Label::positive});
  out.insert(out.end(), fp, {Label::negative, Label::positive});
  out.insert(out.end(), fn, {Label::positive, Label::negative});
  out.insert(out.end(), tn, {Label::negative, Label::negative});
  return out;
}

MetricsReport published(double a, double p, double r, double f, Level level = Level::study) {
  return metrics_from_values(a, p, r, f, level, "", "cell");
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("hand-counted confusion") {
    const auto items = from_counts(3, 1, 0, 2);
    const auto m = compute_metrics(items, Level::study);
    CHECK(m.precision == doctest::Approx(0.75));
    CHECK(m.recall == doctest::Approx(1.0));
    CHECK(m.accuracy == doctest::Approx(0.833).epsilon(0.0012));
    CHECK(m.f1 == doctest::Approx(0.857).epsilon(0.0012));
    CHECK(m.counts == Confusion{3, 1, 0, 2});
  }

  TEST_CASE("matches a naive counting oracle") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<LabeledPrediction> items(1 + rng.below(60));
      for (auto& it : items) {
        it.gold = label_from_bool(rng.below(2) == 1);
        it.predicted = label_from_bool(rng.below(2) == 1);
      }
      double tp = 0, fp = 0, fn = 0, tn = 0;
      for (const auto& it : items) {
        const bool g = it.gold == Label::positive, p = it.predicted == Label::positive;
        tp += g && p;
        fp += !g && p;
        fn += g && !p;
        tn += !g && !p;
      }
      const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
      const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
      const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
      const auto m = compute_metrics(items, Level::sentence);
      CHECK(m.accuracy == (tp + tn) / static_cast<double>(items.size()));
      CHECK(m.precision == prec);
      CHECK(m.recall == rec);
      CHECK(std::abs(m.f1 - f1) <= 1e-15);
      CHECK(m.precision_undefined == (tp + fp == 0));
      CHECK(m.recall_undefined == (tp + fn == 0));
    }
  }

  TEST_CASE("degenerate inputs") {
    std::vector<LabeledPrediction> none;
    CHECK_THROWS_AS(compute_metrics(none, Level::study), ValidationError);
    const auto all_neg = compute_metrics(from_counts(0, 0, 0, 4), Level::study);
    CHECK(all_neg.accuracy == 1.0);
    CHECK(all_neg.precision == 0.0);
    CHECK(all_neg.f1 == 0.0);
    CHECK(all_neg.precision_undefined);
    CHECK(all_neg.recall_undefined);
  }

  TEST_CASE("averaging and two-decimal rendering") {
    std::vector<MetricsReport> runs;
    for (double f : {0.79, 0.79, 0.77, 0.79, 0.80}) runs.push_back(published(0.7, 0.7, 0.9, f, Level::sentence));
    const auto avg = average_runs(runs);
    CHECK(avg.f1 == doctest::Approx(0.788));
    CHECK(format_metric(avg.f1) == "0.79");
    CHECK(avg.n_runs == 5);
    CHECK(format_metric(0.125) == "0.13");
    CHECK(format_metric(1.0) == "1.00");
    CHECK(format_metric(0.0) == "0.00");
  }

  TEST_CASE("published per-attempt study rows average to the published AVG row") {
    const std::vector<MetricsReport> runs{published(0.75, 0.71, 1.00, 0.83), published(0.73, 0.69, 1.00, 0.82),
                                          published(0.72, 0.68, 1.00, 0.81), published(0.72, 0.68, 1.00, 0.81),
                                          published(0.75, 0.71, 1.00, 0.83)};
    const auto avg = average_runs(runs);
    CHECK(format_metric(avg.accuracy) == "0.73");
    CHECK(format_metric(avg.precision) == "0.69");
    CHECK(format_metric(avg.recall) == "1.00");
    CHECK(format_metric(avg.f1) == "0.82");
  }

  TEST_CASE("averaging rejects empty and mixed input") {
    std::vector<MetricsReport> none;
    CHECK_THROWS_AS(average_runs(none), ValidationError);
    std::vector<MetricsReport> mixed{published(1, 1, 1, 1), published(1, 1, 1, 1, Level::sentence)};
    CHECK_THROWS_AS(average_runs(mixed), ValidationError);
    mixed[1] = published(1, 1, 1, 1);
    mixed[1].config_id = "other";
    CHECK_THROWS_AS(average_runs(mixed), ValidationError);
  }

  TEST_CASE("json round trip") {
    auto m = compute_metrics(from_counts(3, 1, 0, 2), Level::bag, "run-1", "cell-a");
    const auto back = metrics_from_json(to_json(m));
    CHECK(back.level == Level::bag);
    CHECK(back.f1 == m.f1);
    CHECK(back.counts == m.counts);
    CHECK(back.run_id == "run-1");
    CHECK(back.config_id == "cell-a");
    CHECK(parse_level("study") == Level::study);
    CHECK_THROWS(parse_level("paragraph"));
  }

  TEST_CASE("gold joins") {
    std::vector<EnrichedSentence> golds(2);
    golds[0] = {"A", 0, "x", {}, "x", Label::positive};
    golds[1] = {"A", 1, "y", {}, "y", Label::positive};
    std::vector<PredictionRecord> preds{{"A", 1, 0.2, 0.8, Label::negative}, {"A", 0, 0.9, 0.1, Label::positive}};
    const auto joined = join_sentence_golds(preds, golds);
    REQUIRE(joined.size() == 2);
    CHECK(joined[0].gold == Label::positive);
    CHECK(joined[0].predicted == Label::negative);
    preds.push_back({"B", 0, 0.5, 0.5, Label::positive});
    CHECK_THROWS_AS(join_sentence_golds(preds, golds), ValidationError);

    std::vector<StudyRecord> studies{{"A", "", "x", {}, Label::negative}};
    std::vector<StudyPrediction> sp{{"A", 0.9, 0.1, Label::positive, 2}};
    const auto js = join_study_golds(sp, studies);
    REQUIRE(js.size() == 1);
    CHECK(js[0].gold == Label::negative);
    sp.push_back({"Z", 0.9, 0.1, Label::positive, 1});
    CHECK_THROWS_AS(join_study_golds(sp, studies), ValidationError);
  }

  TEST_CASE("attempt table layout") {
    const std::vector<MetricsReport> sent{published(0.71, 0.73, 0.85, 0.79, Level::sentence),
                                          published(0.66, 0.65, 1.00, 0.79, Level::sentence)};
    const std::vector<MetricsReport> study{published(0.78, 0.73, 1.00, 0.85), published(0.62, 0.61, 1.00, 0.76)};
    const auto t = attempt_table("BERT", sent, study);
    CHECK(t.header ==
          std::vector<std::string>{"Attempt", "Configuration", "Accuracy", "Precision", "Recall", "F1-score"});
    REQUIRE(t.rows.size() == 6);
    CHECK(t.rows[0] == std::vector<std::string>{"1", "Sentence", "0.71", "0.73", "0.85", "0.79"});
    CHECK(t.rows[1] == std::vector<std::string>{"1", "Study", "0.78", "0.73", "1.00", "0.85"});
    CHECK(t.rows[4][0] == "AVG");
    CHECK(t.rows[5] == std::vector<std::string>{"AVG", "Study", "0.70", "0.67", "1.00", "0.81"});
    const auto md = t.to_markdown();
    CHECK(md.find("| Attempt | Configuration |") != std::string::npos);
    CHECK(t.to_csv().rfind("Attempt,Configuration,Accuracy", 0) == 0);
  }

  TEST_CASE("empty tables keep their header") {
    const auto t = attempt_table("none", {}, {});
    CHECK(t.rows.empty());
    CHECK(t.header.size() == 6);
    CHECK(t.to_markdown().find("F1-score") != std::string::npos);
    const auto g = mil_table("MIL", {});
    CHECK(g.header[1] == "SpaCy Config");
  }

  TEST_CASE("grid table and display names") {
    std::vector<MetricsReport> runs{metrics_from_values(0.65, 0.63, 1.0, 0.77, Level::bag, "", "c")};
    std::vector<GridEntry> grid{{display_backbone("biobert"), display_enricher("sci_scibert"), average_runs(runs)}};
    const auto t = mil_table("MIL", grid);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0] == std::vector<std::string>{"BioBERT", "en_core_sci_scibert", "0.65", "0.63", "1.00", "0.77"});
    CHECK(display_backbone("scibert") == "SciBERT");
    CHECK(display_enricher("sci_md") == "en_core_sci_md");
    CHECK(display_enricher("test_regex") == "test_regex");
  }
}
