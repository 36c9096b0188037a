#include "factcheck/eval.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace factcheck {

ConfusionMatrix confusion(const std::vector<VeracityLabel>& golds,
                          const std::vector<Verdict>& verdicts,
                          const VeracityTaxonomy& taxonomy) {
  if (golds.size() != verdicts.size())
    throw std::runtime_error("confusion: " + std::to_string(golds.size()) + " golds vs " +
                             std::to_string(verdicts.size()) + " verdicts");
  const int k = static_cast<int>(taxonomy.size());
  ConfusionMatrix cm;
  cm.taxonomy = &taxonomy;
  cm.counts = Eigen::MatrixXi::Zero(k, k + 1);
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const VeracityLabel* gold = taxonomy.find(golds[i].canonical_name);
    if (!gold)
      throw std::runtime_error("confusion: gold label \"" + golds[i].canonical_name +
                               "\" not in taxonomy " + taxonomy.name());
    int col = k;  // OTHER
    if (verdicts[i].label) col = taxonomy.require(verdicts[i].label->canonical_name).ordinal;
    cm.counts(gold->ordinal, col) += 1;
  }
  return cm;
}

MetricsReport macro_metrics(const ConfusionMatrix& cm) {
  const int k = static_cast<int>(cm.taxonomy->size());
  MetricsReport report;
  double sum_p = 0, sum_r = 0, sum_f = 0;
  for (int c = 0; c < k; ++c) {
    long tp = cm.counts(c, c);
    long fp = cm.counts.col(c).sum() - tp;  // OTHER is never a predicted class
    long fn = cm.counts.row(c).sum() - tp;  // includes gold-row counts in OTHER
    ClassMetrics m;
    m.label = cm.taxonomy->labels()[c].canonical_name;
    m.support = cm.counts.row(c).sum();
    if (tp + fp > 0)
      m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    else
      ++report.zero_denominator_events;
    if (tp + fn > 0)
      m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    else
      ++report.zero_denominator_events;
    if (m.precision + m.recall > 0)
      m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall);
    else
      ++report.zero_denominator_events;
    sum_p += m.precision;
    sum_r += m.recall;
    sum_f += m.f1;
    report.per_class.push_back(std::move(m));
  }
  report.macro_precision = sum_p / k;
  report.macro_recall = sum_r / k;
  report.macro_f1 = sum_f / k;
  return report;
}

const std::vector<ReferenceRow>& reference_results() {
  static const std::vector<ReferenceRow> rows = {
      {"rawfc", "SVM", 0.3233, 0.3251, 0.3171},
      {"rawfc", "CNN", 0.3880, 0.3850, 0.3859},
      {"rawfc", "RNN", 0.4135, 0.4209, 0.4039},
      {"rawfc", "DeClarE", 0.4339, 0.4352, 0.4218},
      {"rawfc", "dEFEND", 0.4493, 0.4326, 0.4407},
      {"rawfc", "sentHAN", 0.4566, 0.4554, 0.4425},
      {"rawfc", "SBERT-FC", 0.5106, 0.4592, 0.4551},
      {"rawfc", "GenFE", 0.4429, 0.4474, 0.4443},
      {"rawfc", "GenFE-MT", 0.4564, 0.4527, 0.4508},
      {"rawfc", "CofCED", 0.5299, 0.5099, 0.5107},
      {"rawfc", "LLaMA (w/o tuning)", 0.3350, 0.3255, 0.2643},
      {"rawfc", "FactLLaMA (Instruct-tuning w/o external knowledge)", 0.5376, 0.5400, 0.5376},
      {"rawfc", "FactLLaMA (Instruct-tuning with external knowledge)", 0.5611, 0.5550, 0.5565},
      {"liar", "SVM", 0.1578, 0.1592, 0.1534},
      {"liar", "CNN", 0.2258, 0.2239, 0.2136},
      {"liar", "RNN", 0.2436, 0.2120, 0.2079},
      {"liar", "DeClarE", 0.2286, 0.2055, 0.1843},
      {"liar", "dEFEND", 0.2309, 0.1856, 0.1751},
      {"liar", "sentHAN", 0.2264, 0.1996, 0.1846},
      {"liar", "SBERT-FC", 0.2409, 0.2207, 0.2219},
      {"liar", "GenFE", 0.2801, 0.2616, 0.2649},
      {"liar", "GenFE-MT", 0.1855, 0.1990, 0.1515},
      {"liar", "CofCED", 0.2948, 0.2955, 0.2893},
      {"liar", "LLaMA (w/o tuning)", 0.1587, 0.2069, 0.1224},
      {"liar", "FactLLaMA (Instruct-tuning w/o external knowledge)", 0.3232, 0.3157, 0.2998},
      {"liar", "FactLLaMA (Instruct-tuning with external knowledge)", 0.3246, 0.3205, 0.3044},
  };
  return rows;
}

namespace {

std::string fmt4(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string render_results(const MetricsReport& report, const std::vector<ReferenceRow>& reference) {
  std::ostringstream out;
  std::size_t width = 16;
  for (const ClassMetrics& m : report.per_class) width = std::max(width, m.label.size() + 2);
  for (const ReferenceRow& r : reference) width = std::max(width, r.method.size() + 2);

  auto row = [&](const std::string& name, double p, double r, double f) {
    out << name;
    for (std::size_t i = name.size(); i < width; ++i) out << ' ';
    out << fmt4(p) << "  " << fmt4(r) << "  " << fmt4(f) << '\n';
  };

  out << "Class";
  for (std::size_t i = 5; i < width; ++i) out << ' ';
  out << "Precision  Recall  F1\n";
  for (const ClassMetrics& m : report.per_class) row(m.label, m.precision, m.recall, m.f1);
  row("macro", report.macro_precision, report.macro_recall, report.macro_f1);

  if (!reference.empty()) {
    out << "\nReference results\n";
    out << "Method";
    for (std::size_t i = 6; i < width; ++i) out << ' ';
    out << "Precision  Recall  F1\n";
    for (const ReferenceRow& r : reference) row(r.method, r.precision, r.recall, r.f1);
  }
  return out.str();
}

std::string render_confusion(const ConfusionMatrix& cm) {
  const int k = static_cast<int>(cm.taxonomy->size());
  std::vector<std::string> col_names;
  for (const VeracityLabel& l : cm.taxonomy->labels()) col_names.push_back(l.canonical_name);
  col_names.push_back("OTHER");

  std::size_t label_width = 10;
  for (const std::string& n : col_names) label_width = std::max(label_width, n.size() + 2);

  std::ostringstream out;
  out << "gold \\ pred";
  for (std::size_t i = 11; i < label_width; ++i) out << ' ';
  for (const std::string& n : col_names) {
    out << n;
    for (std::size_t i = n.size(); i < label_width; ++i) out << ' ';
  }
  out << '\n';

  for (int r = 0; r < k; ++r) {
    const std::string& name = col_names[r];
    long row_total = cm.counts.row(r).sum();
    out << name;
    for (std::size_t i = name.size(); i < label_width; ++i) out << ' ';
    for (int c = 0; c <= k; ++c) {
      double pct = row_total > 0 ? 100.0 * cm.counts(r, c) / row_total : 0.0;
      char cell[32];
      std::snprintf(cell, sizeof cell, "%d (%.1f%%)", cm.counts(r, c), pct);
      out << cell;
      for (std::size_t i = std::string(cell).size(); i < label_width; ++i) out << ' ';
    }
    out << '\n';
  }
  return out.str();
}

json report_to_json(const MetricsReport& report) {
  json j;
  json per = json::array();
  for (const ClassMetrics& m : report.per_class)
    per.push_back({{"label", m.label},
                   {"precision", m.precision},
                   {"recall", m.recall},
                   {"f1", m.f1},
                   {"support", m.support}});
  j["per_class"] = std::move(per);
  j["macro_precision"] = report.macro_precision;
  j["macro_recall"] = report.macro_recall;
  j["macro_f1"] = report.macro_f1;
  j["zero_denominator_events"] = report.zero_denominator_events;
  return j;
}

json confusion_to_json(const ConfusionMatrix& cm) {
  json j;
  j["taxonomy"] = cm.taxonomy->name();
  json labels = json::array();
  for (const VeracityLabel& l : cm.taxonomy->labels()) labels.push_back(l.canonical_name);
  labels.push_back("OTHER");
  j["columns"] = labels;
  json rows = json::array();
  for (int r = 0; r < cm.counts.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < cm.counts.cols(); ++c) row.push_back(cm.counts(r, c));
    rows.push_back(std::move(row));
  }
  j["counts"] = std::move(rows);
  return j;
}

}  // namespace factcheck
