#pragma once

#include <map>
#include <string>
#include <vector>

#include "factcheck/corpus.hpp"
#include "factcheck/eval.hpp"
#include "factcheck/evidence.hpp"
#include "factcheck/inference.hpp"
#include "factcheck/promptgen.hpp"
#include "factcheck/toml.hpp"

namespace factcheck {

struct SearchSettings {
  std::string provider = "google";  // google | fixture
  std::string fixture_path;
  int max_results = 10;
  std::size_t query_char_cap = 512;
  bool offline = false;
  int concurrency = 4;
};

struct BackendSettings {
  std::string kind = "mock-rule";  // http | mock-rule | mock-hash
  std::string lookup_path;         // mock answer / hash lookup file
  std::string model = "llama-7b";
  std::string completions_path = "/v1/completions";
};

struct PipelineConfig {
  std::string dataset;  // rawfc | liar
  std::string claims_path;
  std::string cache_dir;
  std::string out_dir;
  std::string partition = "test";  // train | validation | test | all
  unsigned long seed = 42;
  FilterPolicy filter = FilterPolicy::defaults();
  PromptTemplate prompt;  // instruction_text empty = taxonomy default
  SearchSettings search;
  BackendSettings backend;
  DecodeParams decode;
  bool with_reference = false;
};

struct StageCounts {
  std::size_t claims_in = 0;
  std::size_t evidence_retrieved = 0;
  std::size_t evidence_kept = 0;
  std::size_t dropped_blocked_domain = 0;
  std::size_t dropped_post_dated = 0;
  std::size_t dropped_undated = 0;
  std::size_t undated_kept = 0;
  std::size_t verdicts_parsed = 0;
  std::size_t verdicts_unparsed = 0;
};

struct RunManifest {
  json config_snapshot;
  std::map<std::string, std::string> stage_versions;
  std::map<std::string, std::string> input_hashes;  // per stage
  std::map<std::string, std::string> timestamps;    // per stage
  std::map<std::string, bool> stage_skipped;
  StageCounts counts;
  MetricsReport report;

  json to_json() const;
};

/// Parse and validate a config file; all problems are reported together.
/// Returns the config when `errors` comes back empty.
PipelineConfig parse_config(const TomlTable& table, std::vector<std::string>& errors);
PipelineConfig load_config(const std::string& path);  // throws with the full error list

/// Hash of a file, or of a directory's sorted (name, hash) listing.
std::string content_hash(const std::string& path);

/// ingest -> retrieve -> build-prompts -> predict -> evaluate. Stage outputs
/// are written under config.out_dir; a stage whose inputs are unchanged since
/// the previous run is skipped. Stage failures carry the stage name.
RunManifest run_pipeline(const PipelineConfig& config);

// Stage helpers shared with the CLI subcommands.
DatasetSplit ingest_claims(const std::string& dataset, const std::string& path);
std::vector<Claim> select_partition(const DatasetSplit& split, const std::string& partition);
PromptTemplate resolve_template(const PipelineConfig& config);
std::unique_ptr<TextBackend> make_backend(const BackendSettings& settings,
                                          const VeracityTaxonomy& taxonomy);
std::unique_ptr<SearchProvider> make_provider(const SearchSettings& settings);

/// Template file loader (same TOML subset, [template] section optional).
PromptTemplate load_template_file(const std::string& path);

}  // namespace factcheck
