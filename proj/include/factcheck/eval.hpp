#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "factcheck/corpus.hpp"
#include "factcheck/inference.hpp"

namespace factcheck {

/// Rows are gold labels in taxonomy order; columns are predicted labels plus
/// one trailing OTHER column that absorbs unparsed verdicts.
struct ConfusionMatrix {
  const VeracityTaxonomy* taxonomy = nullptr;
  Eigen::MatrixXi counts;  // K x (K+1)

  int other_column() const { return static_cast<int>(taxonomy->size()); }
  long total() const { return counts.sum(); }
};

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long support = 0;
};

struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  /// How often the zero-denominator convention (score := 0) fired.
  int zero_denominator_events = 0;
};

ConfusionMatrix confusion(const std::vector<VeracityLabel>& golds,
                          const std::vector<Verdict>& verdicts, const VeracityTaxonomy& taxonomy);

/// Per class: P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2PR/(P+R), each 0 on a
/// zero denominator. The OTHER column contributes false negatives only.
/// Macro scores are unweighted means over the taxonomy classes.
MetricsReport macro_metrics(const ConfusionMatrix& cm);

struct ReferenceRow {
  std::string dataset;  // "rawfc" or "liar"
  std::string method;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Published comparison results for both datasets, as a read-only fixture.
const std::vector<ReferenceRow>& reference_results();

/// Table with Precision/Recall/F1 at 4 decimal places; reference rows print
/// alongside when supplied.
std::string render_results(const MetricsReport& report,
                           const std::vector<ReferenceRow>& reference = {});

/// Labeled grid, gold rows x predicted columns (+OTHER), counts with
/// row-normalized percentages.
std::string render_confusion(const ConfusionMatrix& cm);

json report_to_json(const MetricsReport& report);
json confusion_to_json(const ConfusionMatrix& cm);

}  // namespace factcheck
