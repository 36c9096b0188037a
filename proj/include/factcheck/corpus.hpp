#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "factcheck/util.hpp"

namespace factcheck {

struct VeracityLabel {
  std::string canonical_name;  // lowercase, hyphenated
  std::string taxonomy_id;     // "rawfc" or "liar"
  int ordinal = 0;             // position in taxonomy order

  friend bool operator==(const VeracityLabel&, const VeracityLabel&) = default;
};

/// Fixed label taxonomy for one dataset. Instances come from taxonomy_of();
/// there is no public constructor path that could violate the invariants.
class VeracityTaxonomy {
 public:
  const std::string& name() const { return name_; }
  const std::vector<VeracityLabel>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

  /// Accepted surface strings for a label; the first entry is canonical.
  const std::vector<std::string>& verbalizations(const VeracityLabel& label) const;

  const VeracityLabel* find(const std::string& canonical_name) const;
  const VeracityLabel& require(const std::string& canonical_name) const;

  /// Map a raw dataset label string (any spelling from the alias table) to
  /// its canonical label. Absent when the string is not a known label.
  std::optional<VeracityLabel> normalize(const std::string& raw_label) const;

  static VeracityTaxonomy make_rawfc();
  static VeracityTaxonomy make_liar();

 private:
  VeracityTaxonomy() = default;
  std::string name_;
  std::vector<VeracityLabel> labels_;
  std::map<std::string, std::vector<std::string>> verbalizations_;  // canonical -> surfaces
  std::map<std::string, std::string> aliases_;                      // normalized raw -> canonical
};

/// The fixed taxonomy for "rawfc" or "liar". Throws on any other name.
const VeracityTaxonomy& taxonomy_of(const std::string& name);

struct Claim {
  std::string id;
  std::string text;
  VeracityLabel label;
  std::optional<std::string> claim_date;  // ISO-8601 date the claim was recorded
  std::optional<std::string> speaker;
  std::string dataset;  // taxonomy name
  std::map<std::string, std::string> extra;

  friend bool operator==(const Claim&, const Claim&) = default;
};

struct DatasetSplit {
  std::vector<Claim> train;
  std::vector<Claim> validation;
  std::vector<Claim> test;

  std::size_t total() const { return train.size() + validation.size() + test.size(); }
  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

/// Column positions in a LIAR tab-separated file. -1 means "not present".
struct LiarColumnMap {
  int id = 0;
  int label = 1;
  int statement = 2;
  int speaker = 4;
  int date = -1;
};

/// Load LIAR-style TSV. `path` may be a single file (all rows land in train)
/// or a directory holding train.tsv / valid.tsv / test.tsv.
DatasetSplit load_liar(const std::string& path, const LiarColumnMap& mapping = {});

/// Load RAWFC-style claims from the normalized structured format: a
/// record-per-line file, a directory of per-claim records, or a directory
/// with train/val/test partitions of either kind.
DatasetSplit load_rawfc(const std::string& path);

json claim_to_json(const Claim& claim);
Claim claim_from_json(const json& record, const VeracityTaxonomy& taxonomy);

/// Normalized record-per-line form used between pipeline stages. Each record
/// carries a "split" field so one file holds all partitions.
void save_normalized(const DatasetSplit& split, const std::string& dataset, const std::string& path);
DatasetSplit load_normalized(const std::string& path, const std::string& dataset);

/// Per-label counts per partition, keyed "train"/"validation"/"test".
std::map<std::string, std::map<std::string, std::size_t>> split_stats(const DatasetSplit& split);

}  // namespace factcheck
