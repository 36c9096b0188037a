#include "factcheck/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace factcheck {

namespace {

// Raw label strings differ across dataset distributions: underscores,
// spaces, "pants-on-fire" vs "pants-fire". Canonical form is lowercase
// hyphenated.
std::string hyphenate(const std::string& raw) {
  std::string s = to_lower(normalize_whitespace(raw));
  for (char& c : s)
    if (c == ' ' || c == '_') c = '-';
  std::string out;
  for (char c : s)
    if (!(c == '-' && !out.empty() && out.back() == '-')) out.push_back(c);
  while (!out.empty() && out.front() == '-') out.erase(out.begin());
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

}  // namespace

const std::vector<std::string>& VeracityTaxonomy::verbalizations(const VeracityLabel& label) const {
  auto it = verbalizations_.find(label.canonical_name);
  if (it == verbalizations_.end())
    throw std::runtime_error("label \"" + label.canonical_name + "\" not in taxonomy " + name_);
  return it->second;
}

const VeracityLabel* VeracityTaxonomy::find(const std::string& canonical_name) const {
  for (const VeracityLabel& l : labels_)
    if (l.canonical_name == canonical_name) return &l;
  return nullptr;
}

const VeracityLabel& VeracityTaxonomy::require(const std::string& canonical_name) const {
  const VeracityLabel* l = find(canonical_name);
  if (!l) throw std::runtime_error("label \"" + canonical_name + "\" not in taxonomy " + name_);
  return *l;
}

std::optional<VeracityLabel> VeracityTaxonomy::normalize(const std::string& raw_label) const {
  auto it = aliases_.find(hyphenate(raw_label));
  if (it == aliases_.end()) return std::nullopt;
  return require(it->second);
}

VeracityTaxonomy VeracityTaxonomy::make_rawfc() {
  VeracityTaxonomy t;
  t.name_ = "rawfc";
  int ord = 0;
  for (const char* name : {"true", "half-true", "false"})
    t.labels_.push_back({name, t.name_, ord++});
  t.verbalizations_ = {
      {"true", {"true"}},
      {"half-true", {"half-true", "half true", "partly true", "partially true"}},
      {"false", {"false", "untrue"}},
  };
  t.aliases_ = {
      {"true", "true"},         {"half-true", "half-true"}, {"half", "half-true"},
      {"halftrue", "half-true"}, {"false", "false"},
  };
  return t;
}

VeracityTaxonomy VeracityTaxonomy::make_liar() {
  VeracityTaxonomy t;
  t.name_ = "liar";
  int ord = 0;
  for (const char* name : {"true", "mostly-true", "half-true", "barely-true", "false", "pants-fire"})
    t.labels_.push_back({name, t.name_, ord++});
  t.verbalizations_ = {
      {"true", {"true"}},
      {"mostly-true", {"mostly-true", "mostly true"}},
      {"half-true", {"half-true", "half true"}},
      {"barely-true", {"barely-true", "barely true"}},
      {"false", {"false", "untrue"}},
      {"pants-fire", {"pants-fire", "pants on fire", "pants-on-fire"}},
  };
  t.aliases_ = {
      {"true", "true"},
      {"mostly-true", "mostly-true"},
      {"half-true", "half-true"},
      {"half", "half-true"},
      {"halftrue", "half-true"},
      {"barely-true", "barely-true"},
      {"false", "false"},
      {"pants-fire", "pants-fire"},
      {"pants-on-fire", "pants-fire"},
      {"pantsfire", "pants-fire"},
  };
  return t;
}

const VeracityTaxonomy& taxonomy_of(const std::string& name) {
  static const VeracityTaxonomy rawfc = VeracityTaxonomy::make_rawfc();
  static const VeracityTaxonomy liar = VeracityTaxonomy::make_liar();
  if (name == "rawfc") return rawfc;
  if (name == "liar") return liar;
  throw std::runtime_error("unknown taxonomy \"" + name + "\" (expected rawfc or liar)");
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return out;
}

std::vector<Claim> load_liar_file(const std::string& path, const LiarColumnMap& map,
                                  const VeracityTaxonomy& taxonomy) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<Claim> out;
  std::string line;
  std::size_t lineno = 0;
  int max_col = std::max({map.id, map.label, map.statement});
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (normalize_whitespace(line).empty()) continue;
    std::vector<std::string> cols = split_tabs(line);
    if (static_cast<int>(cols.size()) <= max_col)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected at least " +
                               std::to_string(max_col + 1) + " columns, got " +
                               std::to_string(cols.size()));
    Claim c;
    c.id = normalize_whitespace(cols[map.id]);
    c.text = normalize_whitespace(cols[map.statement]);
    if (c.text.empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty statement");
    auto label = taxonomy.normalize(cols[map.label]);
    if (!label)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown label \"" +
                               cols[map.label] + "\"");
    c.label = *label;
    c.dataset = taxonomy.name();
    if (map.speaker >= 0 && map.speaker < static_cast<int>(cols.size())) {
      std::string speaker = normalize_whitespace(cols[map.speaker]);
      if (!speaker.empty()) c.speaker = speaker;
    }
    if (map.date >= 0 && map.date < static_cast<int>(cols.size())) {
      std::string date = normalize_whitespace(cols[map.date]);
      if (!date.empty()) c.claim_date = date;
    }
    out.push_back(std::move(c));
  }
  return out;
}

void check_unique_ids(const DatasetSplit& split) {
  std::vector<std::string> ids;
  for (const auto* part : {&split.train, &split.validation, &split.test})
    for (const Claim& c : *part) ids.push_back(c.id);
  std::sort(ids.begin(), ids.end());
  auto dup = std::adjacent_find(ids.begin(), ids.end());
  if (dup != ids.end())
    throw std::runtime_error("duplicate claim id across partitions: " + *dup);
}

std::optional<std::string> find_partition(const std::string& dir,
                                          const std::vector<std::string>& stems) {
  for (const std::string& stem : stems) {
    for (const std::string& name :
         {stem, stem + ".tsv", stem + ".jsonl", stem + ".json"}) {
      fs::path p = fs::path(dir) / name;
      if (fs::exists(p)) return p.string();
    }
  }
  return std::nullopt;
}

}  // namespace

DatasetSplit load_liar(const std::string& path, const LiarColumnMap& mapping) {
  if (!fs::exists(path)) throw std::runtime_error("path does not exist: " + path);
  const VeracityTaxonomy& taxonomy = taxonomy_of("liar");
  DatasetSplit split;
  if (fs::is_directory(path)) {
    if (auto p = find_partition(path, {"train"})) split.train = load_liar_file(*p, mapping, taxonomy);
    if (auto p = find_partition(path, {"valid", "validation", "val"}))
      split.validation = load_liar_file(*p, mapping, taxonomy);
    if (auto p = find_partition(path, {"test"})) split.test = load_liar_file(*p, mapping, taxonomy);
  } else {
    split.train = load_liar_file(path, mapping, taxonomy);
  }
  check_unique_ids(split);
  return split;
}

json claim_to_json(const Claim& claim) {
  json r;
  r["id"] = claim.id;
  r["text"] = claim.text;
  r["label"] = claim.label.canonical_name;
  if (claim.claim_date) r["date"] = *claim.claim_date;
  if (claim.speaker) r["speaker"] = *claim.speaker;
  r["dataset"] = claim.dataset;
  if (!claim.extra.empty()) r["extra"] = claim.extra;
  return r;
}

Claim claim_from_json(const json& record, const VeracityTaxonomy& taxonomy) {
  for (const char* field : {"id", "text", "label"})
    if (!record.contains(field))
      throw std::runtime_error("claim record missing field \"" + std::string(field) + "\"");
  Claim c;
  c.id = record.at("id").get<std::string>();
  c.text = normalize_whitespace(record.at("text").get<std::string>());
  if (c.text.empty()) throw std::runtime_error("claim " + c.id + ": empty text");
  std::string raw_label = record.at("label").get<std::string>();
  auto label = taxonomy.normalize(raw_label);
  if (!label)
    throw std::runtime_error("claim " + c.id + ": unknown label \"" + raw_label + "\" for taxonomy " +
                             taxonomy.name());
  c.label = *label;
  c.dataset = taxonomy.name();
  if (record.contains("date") && !record.at("date").is_null())
    c.claim_date = record.at("date").get<std::string>();
  if (record.contains("speaker") && !record.at("speaker").is_null())
    c.speaker = record.at("speaker").get<std::string>();
  if (record.contains("extra"))
    for (const auto& [k, v] : record.at("extra").items())
      c.extra[k] = v.is_string() ? v.get<std::string>() : v.dump();
  return c;
}

namespace {

std::vector<Claim> load_rawfc_records(const std::string& path, const VeracityTaxonomy& taxonomy) {
  std::vector<Claim> out;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file() && (e.path().extension() == ".json" || e.path().extension() == ".jsonl"))
        files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      if (f.extension() == ".jsonl") {
        for (const json& r : read_jsonl(f.string())) out.push_back(claim_from_json(r, taxonomy));
      } else {
        json r = json::parse(read_file(f.string()));
        out.push_back(claim_from_json(r, taxonomy));
      }
    }
  } else {
    for (const json& r : read_jsonl(path)) out.push_back(claim_from_json(r, taxonomy));
  }
  return out;
}

}  // namespace

DatasetSplit load_rawfc(const std::string& path) {
  if (!fs::exists(path)) throw std::runtime_error("path does not exist: " + path);
  const VeracityTaxonomy& taxonomy = taxonomy_of("rawfc");
  DatasetSplit split;
  bool partitioned = false;
  if (fs::is_directory(path)) {
    if (auto p = find_partition(path, {"train"})) {
      split.train = load_rawfc_records(*p, taxonomy);
      partitioned = true;
    }
    if (auto p = find_partition(path, {"val", "valid", "validation"})) {
      split.validation = load_rawfc_records(*p, taxonomy);
      partitioned = true;
    }
    if (auto p = find_partition(path, {"test"})) {
      split.test = load_rawfc_records(*p, taxonomy);
      partitioned = true;
    }
  }
  if (!partitioned) split.train = load_rawfc_records(path, taxonomy);
  check_unique_ids(split);
  return split;
}

void save_normalized(const DatasetSplit& split, const std::string& dataset, const std::string& path) {
  std::vector<json> records;
  auto emit = [&](const std::vector<Claim>& claims, const char* part) {
    for (const Claim& c : claims) {
      json r = claim_to_json(c);
      r["split"] = part;
      records.push_back(std::move(r));
    }
  };
  emit(split.train, "train");
  emit(split.validation, "validation");
  emit(split.test, "test");
  (void)dataset;
  write_jsonl(path, records);
}

DatasetSplit load_normalized(const std::string& path, const std::string& dataset) {
  DatasetSplit split;
  for (const json& r : read_jsonl(path)) {
    std::string ds = r.contains("dataset") ? r.at("dataset").get<std::string>() : dataset;
    Claim c = claim_from_json(r, taxonomy_of(ds));
    std::string part = r.contains("split") ? r.at("split").get<std::string>() : "train";
    if (part == "train")
      split.train.push_back(std::move(c));
    else if (part == "validation" || part == "valid" || part == "val")
      split.validation.push_back(std::move(c));
    else if (part == "test")
      split.test.push_back(std::move(c));
    else
      throw std::runtime_error(path + ": unknown split \"" + part + "\"");
  }
  check_unique_ids(split);
  return split;
}

std::map<std::string, std::map<std::string, std::size_t>> split_stats(const DatasetSplit& split) {
  std::map<std::string, std::map<std::string, std::size_t>> stats;
  auto count = [&](const std::vector<Claim>& claims, const char* part) {
    auto& m = stats[part];  // present even when empty
    for (const Claim& c : claims) ++m[c.label.canonical_name];
  };
  count(split.train, "train");
  count(split.validation, "validation");
  count(split.test, "test");
  return stats;
}

}  // namespace factcheck
