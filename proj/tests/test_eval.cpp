#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "factcheck/eval.hpp"

using namespace factcheck;

namespace {

Verdict verdict_for(const VeracityTaxonomy& taxonomy, const std::string& label_or_other) {
  Verdict v;
  if (label_or_other == "OTHER") {
    v.status = ParseStatus::Unparsed;
  } else {
    v.label = taxonomy.require(label_or_other);
    v.status = ParseStatus::Exact;
  }
  return v;
}

/// Brute-force metrics straight from the prediction pairs, independent of the
/// matrix bookkeeping in the library.
MetricsReport brute_force(const std::vector<VeracityLabel>& golds,
                          const std::vector<Verdict>& verdicts,
                          const VeracityTaxonomy& taxonomy) {
  MetricsReport report;
  double sp = 0, sr = 0, sf = 0;
  for (const VeracityLabel& cls : taxonomy.labels()) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
      bool gold_is = golds[i].canonical_name == cls.canonical_name;
      bool pred_is = verdicts[i].label && verdicts[i].label->canonical_name == cls.canonical_name;
      if (gold_is && pred_is) ++tp;
      if (!gold_is && pred_is) ++fp;
      if (gold_is && !pred_is) ++fn;
    }
    double p = tp + fp > 0 ? double(tp) / (tp + fp) : 0.0;
    double r = tp + fn > 0 ? double(tp) / (tp + fn) : 0.0;
    double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    sp += p;
    sr += r;
    sf += f;
  }
  report.macro_precision = sp / taxonomy.size();
  report.macro_recall = sr / taxonomy.size();
  report.macro_f1 = sf / taxonomy.size();
  return report;
}

}  // namespace

TEST_CASE("confusion matrix shape and placement") {
  const VeracityTaxonomy& rawfc = taxonomy_of("rawfc");
  std::vector<VeracityLabel> golds = {rawfc.require("true"), rawfc.require("half-true"),
                                      rawfc.require("false"), rawfc.require("false")};
  std::vector<Verdict> verdicts = {verdict_for(rawfc, "true"), verdict_for(rawfc, "false"),
                                   verdict_for(rawfc, "OTHER"), verdict_for(rawfc, "false")};
  ConfusionMatrix cm = confusion(golds, verdicts, rawfc);
  CHECK(cm.counts.rows() == 3);
  CHECK(cm.counts.cols() == 4);
  CHECK(cm.total() == 4);
  CHECK(cm.counts(0, 0) == 1);  // true -> true
  CHECK(cm.counts(1, 2) == 1);  // half-true -> false
  CHECK(cm.counts(2, 3) == 1);  // false -> OTHER
  CHECK(cm.counts(2, 2) == 1);

  CHECK_THROWS(confusion(golds, {verdicts[0]}, rawfc));  // size mismatch
}

TEST_CASE("worked 2-class example") {
  // Gold: a a b b; predicted: a b b b.
  // class a: TP=1 FP=0 FN=1 -> P=1, R=0.5, F1=2/3
  // class b: TP=2 FP=1 FN=0 -> P=2/3, R=1, F1=0.8
  // macro F1 = (2/3 + 0.8)/2 = 0.7333...
  const VeracityTaxonomy& rawfc = taxonomy_of("rawfc");  // use true/half-true, ignore false
  std::vector<VeracityLabel> golds = {rawfc.require("true"), rawfc.require("true"),
                                      rawfc.require("half-true"), rawfc.require("half-true")};
  std::vector<Verdict> verdicts = {verdict_for(rawfc, "true"), verdict_for(rawfc, "half-true"),
                                   verdict_for(rawfc, "half-true"), verdict_for(rawfc, "half-true")};
  MetricsReport r = macro_metrics(confusion(golds, verdicts, rawfc));
  CHECK(r.per_class[0].precision == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.per_class[0].recall == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.per_class[0].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(r.per_class[1].precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(r.per_class[1].recall == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.per_class[1].f1 == doctest::Approx(0.8).epsilon(1e-12));
  // Two-class macro over {true, half-true} only:
  double two_class_macro_f1 = (r.per_class[0].f1 + r.per_class[1].f1) / 2;
  CHECK(two_class_macro_f1 == doctest::Approx(0.733333333333).epsilon(1e-9));
  // The third class never appears: its P/R/F1 are 0 by convention.
  CHECK(r.per_class[2].precision == 0.0);
  CHECK(r.per_class[2].recall == 0.0);
  CHECK(r.zero_denominator_events == 3);
}

TEST_CASE("OTHER column contributes false negatives only") {
  const VeracityTaxonomy& rawfc = taxonomy_of("rawfc");
  std::vector<VeracityLabel> golds = {rawfc.require("true"), rawfc.require("true")};
  std::vector<Verdict> verdicts = {verdict_for(rawfc, "true"), verdict_for(rawfc, "OTHER")};
  MetricsReport r = macro_metrics(confusion(golds, verdicts, rawfc));
  // Unparsed verdict lowers recall (1 FN) but not precision (0 FP).
  CHECK(r.per_class[0].precision == doctest::Approx(1.0));
  CHECK(r.per_class[0].recall == doctest::Approx(0.5));
}

TEST_CASE("all-unparsed run scores zero without dividing by zero") {
  const VeracityTaxonomy& liar = taxonomy_of("liar");
  std::vector<VeracityLabel> golds;
  std::vector<Verdict> verdicts;
  for (const VeracityLabel& l : liar.labels()) {
    golds.push_back(l);
    verdicts.push_back(verdict_for(liar, "OTHER"));
  }
  MetricsReport r = macro_metrics(confusion(golds, verdicts, liar));
  CHECK(r.macro_precision == 0.0);
  CHECK(r.macro_recall == 0.0);
  CHECK(r.macro_f1 == 0.0);
  CHECK(r.zero_denominator_events > 0);
}

TEST_CASE("perfect run scores one") {
  const VeracityTaxonomy& liar = taxonomy_of("liar");
  std::vector<VeracityLabel> golds;
  std::vector<Verdict> verdicts;
  for (const VeracityLabel& l : liar.labels()) {
    golds.push_back(l);
    verdicts.push_back(verdict_for(liar, l.canonical_name));
  }
  MetricsReport r = macro_metrics(confusion(golds, verdicts, liar));
  CHECK(r.macro_precision == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.macro_recall == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.macro_f1 == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.zero_denominator_events == 0);
}

TEST_CASE("macro metrics agree with the brute-force oracle on random data") {
  const VeracityTaxonomy& liar = taxonomy_of("liar");
  std::mt19937 rng(12345);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n = 1 + rng() % 40;
    std::vector<VeracityLabel> golds;
    std::vector<Verdict> verdicts;
    for (std::size_t i = 0; i < n; ++i) {
      golds.push_back(liar.labels()[rng() % liar.size()]);
      std::size_t pred = rng() % (liar.size() + 1);
      verdicts.push_back(
          verdict_for(liar, pred == liar.size() ? "OTHER" : liar.labels()[pred].canonical_name));
    }
    MetricsReport lib = macro_metrics(confusion(golds, verdicts, liar));
    MetricsReport oracle = brute_force(golds, verdicts, liar);
    CHECK(std::abs(lib.macro_precision - oracle.macro_precision) <= 1e-12);
    CHECK(std::abs(lib.macro_recall - oracle.macro_recall) <= 1e-12);
    CHECK(std::abs(lib.macro_f1 - oracle.macro_f1) <= 1e-12);
  }
}

TEST_CASE("metrics are invariant under permutation of examples") {
  const VeracityTaxonomy& rawfc = taxonomy_of("rawfc");
  std::mt19937 rng(99);
  std::vector<VeracityLabel> golds;
  std::vector<Verdict> verdicts;
  for (int i = 0; i < 60; ++i) {
    golds.push_back(rawfc.labels()[rng() % 3]);
    std::size_t pred = rng() % 4;
    verdicts.push_back(verdict_for(rawfc, pred == 3 ? "OTHER" : rawfc.labels()[pred].canonical_name));
  }
  MetricsReport before = macro_metrics(confusion(golds, verdicts, rawfc));
  std::vector<std::size_t> order(golds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<VeracityLabel> g2;
  std::vector<Verdict> v2;
  for (std::size_t i : order) {
    g2.push_back(golds[i]);
    v2.push_back(verdicts[i]);
  }
  MetricsReport after = macro_metrics(confusion(g2, v2, rawfc));
  CHECK(before.macro_precision == after.macro_precision);
  CHECK(before.macro_recall == after.macro_recall);
  CHECK(before.macro_f1 == after.macro_f1);
}

TEST_CASE("reference table carries both datasets and the headline rows") {
  const auto& rows = reference_results();
  CHECK(rows.size() == 26);
  int rawfc_rows = 0, liar_rows = 0;
  const ReferenceRow* rawfc_best = nullptr;
  const ReferenceRow* liar_best = nullptr;
  for (const ReferenceRow& r : rows) {
    if (r.dataset == "rawfc") ++rawfc_rows;
    if (r.dataset == "liar") ++liar_rows;
    if (r.method == "FactLLaMA (Instruct-tuning with external knowledge)") {
      if (r.dataset == "rawfc") rawfc_best = &r;
      if (r.dataset == "liar") liar_best = &r;
    }
  }
  CHECK(rawfc_rows == 13);
  CHECK(liar_rows == 13);
  REQUIRE(rawfc_best);
  CHECK(rawfc_best->precision == 0.5611);
  CHECK(rawfc_best->recall == 0.5550);
  CHECK(rawfc_best->f1 == 0.5565);
  REQUIRE(liar_best);
  CHECK(liar_best->precision == 0.3246);
  CHECK(liar_best->recall == 0.3205);
  CHECK(liar_best->f1 == 0.3044);
}

TEST_CASE("rendering") {
  const VeracityTaxonomy& rawfc = taxonomy_of("rawfc");
  std::vector<VeracityLabel> golds = {rawfc.require("true"), rawfc.require("false")};
  std::vector<Verdict> verdicts = {verdict_for(rawfc, "true"), verdict_for(rawfc, "OTHER")};
  ConfusionMatrix cm = confusion(golds, verdicts, rawfc);
  MetricsReport report = macro_metrics(cm);

  SUBCASE("results table uses 4 decimal places and includes a macro row") {
    std::string table = render_results(report);
    CHECK(table.find("macro") != std::string::npos);
    CHECK(table.find("0.3333") != std::string::npos);  // macro precision (1+0+0)/3
    CHECK(table.find("Precision  Recall  F1") != std::string::npos);
  }
  SUBCASE("reference rows render when supplied") {
    std::vector<ReferenceRow> refs;
    for (const ReferenceRow& r : reference_results())
      if (r.dataset == "rawfc") refs.push_back(r);
    std::string table = render_results(report, refs);
    CHECK(table.find("Reference results") != std::string::npos);
    CHECK(table.find("0.5611  0.5550  0.5565") != std::string::npos);
    CHECK(render_results(report).find("Reference results") == std::string::npos);
  }
  SUBCASE("confusion grid shows OTHER and row percentages") {
    std::string grid = render_confusion(cm);
    CHECK(grid.find("OTHER") != std::string::npos);
    CHECK(grid.find("1 (100.0%)") != std::string::npos);
    CHECK(grid.find("half-true") != std::string::npos);
  }
}

TEST_CASE("json exports") {
  const VeracityTaxonomy& rawfc = taxonomy_of("rawfc");
  std::vector<VeracityLabel> golds = {rawfc.require("true")};
  std::vector<Verdict> verdicts = {verdict_for(rawfc, "OTHER")};
  ConfusionMatrix cm = confusion(golds, verdicts, rawfc);
  json cj = confusion_to_json(cm);
  CHECK(cj.at("columns").size() == 4);
  CHECK(cj.at("columns")[3] == "OTHER");
  CHECK(cj.at("counts")[0][3] == 1);

  json rj = report_to_json(macro_metrics(cm));
  CHECK(rj.at("per_class").size() == 3);
  CHECK(rj.at("macro_f1") == 0.0);
  CHECK(rj.contains("zero_denominator_events"));
}
