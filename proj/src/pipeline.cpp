#include "factcheck/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <stdexcept>

namespace fs = std::filesystem;

namespace factcheck {

namespace {

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? v : "";
}

json config_to_json(const PipelineConfig& c) {
  json j;
  j["dataset"] = c.dataset;
  j["claims_path"] = c.claims_path;
  j["cache_dir"] = c.cache_dir;
  j["out_dir"] = c.out_dir;
  j["partition"] = c.partition;
  j["seed"] = c.seed;
  j["filter"] = {{"blocked_domains", std::vector<std::string>(c.filter.blocked_domains.begin(),
                                                              c.filter.blocked_domains.end())},
                 {"enforce_date_ceiling", c.filter.enforce_date_ceiling},
                 {"drop_undated", c.filter.drop_undated}};
  j["template"] = template_to_json(c.prompt);
  j["search"] = {{"provider", c.search.provider},
                 {"fixture_path", c.search.fixture_path},
                 {"max_results", c.search.max_results},
                 {"query_char_cap", c.search.query_char_cap},
                 {"offline", c.search.offline},
                 {"concurrency", c.search.concurrency}};
  j["backend"] = {{"kind", c.backend.kind},
                  {"lookup_path", c.backend.lookup_path},
                  {"model", c.backend.model},
                  {"completions_path", c.backend.completions_path}};
  j["decode"] = {{"max_new_tokens", c.decode.max_new_tokens},
                 {"temperature", c.decode.temperature},
                 {"stop", c.decode.stop}};
  return j;
}

}  // namespace

json RunManifest::to_json() const {
  json j;
  j["config"] = config_snapshot;
  j["stage_versions"] = stage_versions;
  j["input_hashes"] = input_hashes;
  j["timestamps"] = timestamps;
  j["stage_skipped"] = stage_skipped;
  j["counts"] = {{"claims_in", counts.claims_in},
                 {"evidence_retrieved", counts.evidence_retrieved},
                 {"evidence_kept", counts.evidence_kept},
                 {"dropped_blocked_domain", counts.dropped_blocked_domain},
                 {"dropped_post_dated", counts.dropped_post_dated},
                 {"dropped_undated", counts.dropped_undated},
                 {"undated_kept", counts.undated_kept},
                 {"verdicts_parsed", counts.verdicts_parsed},
                 {"verdicts_unparsed", counts.verdicts_unparsed}};
  j["report"] = report_to_json(report);
  return j;
}

PipelineConfig parse_config(const TomlTable& t, std::vector<std::string>& errors) {
  PipelineConfig c;
  auto need_string = [&](const char* key, std::string& out) {
    if (auto v = t.get_string(key))
      out = *v;
    else
      errors.push_back(std::string("missing or non-string field: ") + key);
  };
  need_string("dataset", c.dataset);
  need_string("claims_path", c.claims_path);
  need_string("out_dir", c.out_dir);
  if (auto v = t.get_string("cache_dir")) c.cache_dir = *v;
  if (auto v = t.get_string("partition")) c.partition = *v;
  if (auto v = t.get_int("seed")) c.seed = static_cast<unsigned long>(*v);

  if (!c.dataset.empty() && c.dataset != "rawfc" && c.dataset != "liar")
    errors.push_back("dataset must be rawfc or liar, got \"" + c.dataset + "\"");
  if (c.partition != "train" && c.partition != "validation" && c.partition != "test" &&
      c.partition != "all")
    errors.push_back("partition must be train, validation, test, or all");

  if (auto v = t.get_string_array("filter.blocked_domains")) {
    c.filter.blocked_domains.clear();
    for (const std::string& d : *v) c.filter.blocked_domains.insert(to_lower(d));
  }
  if (auto v = t.get_bool("filter.enforce_date_ceiling")) c.filter.enforce_date_ceiling = *v;
  if (auto v = t.get_bool("filter.drop_undated")) c.filter.drop_undated = *v;

  c.prompt.instruction_text.clear();  // empty = taxonomy default
  if (auto v = t.get_string("template.instruction")) c.prompt.instruction_text = *v;
  if (auto v = t.get_string_array("template.section_markers")) {
    if (v->size() == 3)
      for (int i = 0; i < 3; ++i) c.prompt.section_markers[i] = (*v)[i];
    else
      errors.push_back("template.section_markers must have exactly 3 entries");
  }
  if (auto v = t.get_string("template.response_marker")) c.prompt.response_marker = *v;
  if (auto v = t.get_int("template.top_k_evidence")) c.prompt.top_k_evidence = static_cast<int>(*v);
  if (auto v = t.get_string("template.evidence_separator")) c.prompt.evidence_separator = *v;
  if (auto v = t.get_int("template.char_budget")) c.prompt.char_budget = static_cast<std::size_t>(*v);
  if (c.prompt.top_k_evidence < 0) errors.push_back("template.top_k_evidence must be >= 0");

  if (auto v = t.get_string("search.provider")) c.search.provider = *v;
  if (auto v = t.get_string("search.fixture_path")) c.search.fixture_path = *v;
  if (auto v = t.get_int("search.max_results")) c.search.max_results = static_cast<int>(*v);
  if (auto v = t.get_int("search.query_char_cap"))
    c.search.query_char_cap = static_cast<std::size_t>(*v);
  if (auto v = t.get_bool("search.offline")) c.search.offline = *v;
  if (auto v = t.get_int("search.concurrency")) c.search.concurrency = static_cast<int>(*v);
  if (c.search.provider != "google" && c.search.provider != "fixture")
    errors.push_back("search.provider must be google or fixture");
  if (c.search.provider == "fixture" && c.search.fixture_path.empty() && !c.search.offline)
    errors.push_back("search.fixture_path is required for the fixture provider");
  if (c.search.max_results < 1) errors.push_back("search.max_results must be >= 1");
  if (c.search.concurrency < 1) errors.push_back("search.concurrency must be >= 1");

  if (auto v = t.get_string("backend.kind")) c.backend.kind = *v;
  if (auto v = t.get_string("backend.lookup_path")) c.backend.lookup_path = *v;
  if (auto v = t.get_string("backend.model")) c.backend.model = *v;
  if (auto v = t.get_string("backend.completions_path")) c.backend.completions_path = *v;
  if (c.backend.kind != "http" && c.backend.kind != "mock-rule" && c.backend.kind != "mock-hash")
    errors.push_back("backend.kind must be http, mock-rule, or mock-hash, got \"" + c.backend.kind +
                     "\"");
  if (c.backend.kind == "mock-rule" && c.backend.lookup_path.empty())
    errors.push_back("backend.lookup_path is required for mock-rule");

  if (auto v = t.get_int("decode.max_new_tokens")) c.decode.max_new_tokens = static_cast<int>(*v);
  if (auto v = t.get_double("decode.temperature")) c.decode.temperature = *v;
  if (auto v = t.get_string_array("decode.stop")) c.decode.stop = *v;
  if (c.decode.max_new_tokens < 1) errors.push_back("decode.max_new_tokens must be >= 1");
  if (c.decode.temperature < 0.0) errors.push_back("decode.temperature must be >= 0");

  if (auto v = t.get_bool("evaluate.with_reference")) c.with_reference = *v;
  return c;
}

PipelineConfig load_config(const std::string& path) {
  TomlTable table = TomlTable::parse_file(path);
  std::vector<std::string> errors;
  PipelineConfig c = parse_config(table, errors);
  if (!errors.empty()) {
    std::string message = "invalid config " + path + ":";
    for (const std::string& e : errors) message += "\n  - " + e;
    throw std::runtime_error(message);
  }
  return c;
}

PromptTemplate load_template_file(const std::string& path) {
  TomlTable t = TomlTable::parse_file(path);
  PromptTemplate tmpl;
  auto key = [&](const char* name) {
    return t.has(std::string("template.") + name) ? std::string("template.") + name
                                                  : std::string(name);
  };
  if (auto v = t.get_string(key("instruction"))) tmpl.instruction_text = *v;
  if (auto v = t.get_string_array(key("section_markers"))) {
    if (v->size() != 3) throw std::runtime_error(path + ": section_markers must have 3 entries");
    for (int i = 0; i < 3; ++i) tmpl.section_markers[i] = (*v)[i];
  }
  if (auto v = t.get_string(key("response_marker"))) tmpl.response_marker = *v;
  if (auto v = t.get_int(key("top_k_evidence"))) tmpl.top_k_evidence = static_cast<int>(*v);
  if (auto v = t.get_string(key("evidence_separator"))) tmpl.evidence_separator = *v;
  if (auto v = t.get_int(key("char_budget"))) tmpl.char_budget = static_cast<std::size_t>(*v);
  return tmpl;
}

std::string content_hash(const std::string& path) {
  if (!fs::exists(path)) throw std::runtime_error("path does not exist: " + path);
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(path))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string material;
    for (const fs::path& f : files)
      material += f.lexically_relative(path).string() + "\n" + hash_file(f.string()) + "\n";
    return sha256_hex(material);
  }
  return hash_file(path);
}

DatasetSplit ingest_claims(const std::string& dataset, const std::string& path) {
  // A normalized record-per-line file re-loads as-is; raw dataset layouts go
  // through the dataset loader.
  if (!fs::is_directory(path)) {
    try {
      std::vector<json> records = read_jsonl(path);
      if (!records.empty() && records.front().contains("dataset"))
        return load_normalized(path, dataset);
    } catch (const std::exception&) {
      // fall through to the raw loaders
    }
  }
  if (dataset == "liar") return load_liar(path);
  if (dataset == "rawfc") return load_rawfc(path);
  throw std::runtime_error("unknown dataset \"" + dataset + "\"");
}

std::vector<Claim> select_partition(const DatasetSplit& split, const std::string& partition) {
  if (partition == "train") return split.train;
  if (partition == "validation") return split.validation;
  if (partition == "test") return split.test;
  if (partition == "all") {
    std::vector<Claim> all = split.train;
    all.insert(all.end(), split.validation.begin(), split.validation.end());
    all.insert(all.end(), split.test.begin(), split.test.end());
    return all;
  }
  throw std::runtime_error("unknown partition \"" + partition + "\"");
}

PromptTemplate resolve_template(const PipelineConfig& config) {
  PromptTemplate t = config.prompt;
  if (t.instruction_text.empty())
    t.instruction_text = PromptTemplate::defaults_for(taxonomy_of(config.dataset)).instruction_text;
  return t;
}

std::unique_ptr<SearchProvider> make_provider(const SearchSettings& settings) {
  if (settings.provider == "fixture") {
    if (settings.fixture_path.empty()) return nullptr;  // offline, cache only
    return std::make_unique<FixtureSearchProvider>(settings.fixture_path);
  }
  if (settings.offline) return nullptr;
  HttpProviderConfig cfg;
  cfg.api_key = env_or_empty("FACTCHECK_SEARCH_API_KEY");
  cfg.engine_id = env_or_empty("FACTCHECK_SEARCH_ENGINE_ID");
  if (cfg.api_key.empty())
    throw std::runtime_error("FACTCHECK_SEARCH_API_KEY is not set (required for live search)");
  return std::make_unique<HttpSearchProvider>(std::move(cfg));
}

std::unique_ptr<TextBackend> make_backend(const BackendSettings& settings,
                                          const VeracityTaxonomy& taxonomy) {
  if (settings.kind == "mock-rule")
    return std::make_unique<RuleMockBackend>(RuleMockBackend::from_file(settings.lookup_path));
  if (settings.kind == "mock-hash") {
    std::map<std::string, std::string> lookup;
    if (!settings.lookup_path.empty()) {
      json j = json::parse(read_file(settings.lookup_path));
      for (const auto& [k, v] : j.items()) lookup[k] = v.get<std::string>();
    }
    std::vector<std::string> pool;
    for (const VeracityLabel& l : taxonomy.labels()) pool.push_back(l.canonical_name);
    return std::make_unique<PromptHashMockBackend>(std::move(lookup), std::move(pool));
  }
  if (settings.kind == "http") {
    HttpBackendConfig cfg;
    cfg.base_url = env_or_empty("FACTCHECK_INFERENCE_URL");
    cfg.api_key = env_or_empty("FACTCHECK_INFERENCE_API_KEY");
    cfg.model = settings.model;
    cfg.path = settings.completions_path;
    if (cfg.base_url.empty())
      throw std::runtime_error("FACTCHECK_INFERENCE_URL is not set (required for http backend)");
    return std::make_unique<HttpCompletionBackend>(std::move(cfg));
  }
  throw std::runtime_error("unknown backend kind \"" + settings.kind + "\"");
}

namespace {

struct StageState {
  json data;  // stage -> {input_hash, timestamp, counts?}
  std::string path;

  static StageState load(const std::string& out_dir) {
    StageState s;
    s.path = (fs::path(out_dir) / "stage_state.json").string();
    if (fs::exists(s.path)) s.data = json::parse(read_file(s.path));
    if (!s.data.is_object()) s.data = json::object();
    return s;
  }
  void save() const { write_file(path, data.dump(2) + "\n"); }

  bool fresh(const std::string& stage, const std::string& input_hash,
             const std::vector<std::string>& outputs) const {
    if (!data.contains(stage)) return false;
    if (data.at(stage).value("input_hash", std::string{}) != input_hash) return false;
    for (const std::string& o : outputs)
      if (!fs::exists(o)) return false;
    return true;
  }
  void mark(const std::string& stage, const std::string& input_hash) {
    data[stage] = {{"input_hash", input_hash}, {"timestamp", now_iso8601()}};
  }
};

template <class Fn>
void run_stage(const char* name, RunManifest& manifest, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage ") + name + ": " + e.what());
  }
  manifest.timestamps[name] = now_iso8601();
}

}  // namespace

RunManifest run_pipeline(const PipelineConfig& config) {
  if (config.out_dir.empty()) throw std::runtime_error("config.out_dir is not set");
  fs::create_directories(config.out_dir);

  const VeracityTaxonomy& taxonomy = taxonomy_of(config.dataset);
  const PromptTemplate tmpl = resolve_template(config);
  const std::string normalized_path = (fs::path(config.out_dir) / "normalized.jsonl").string();
  const std::string bundles_path = (fs::path(config.out_dir) / "bundles.jsonl").string();
  const std::string prompts_path = (fs::path(config.out_dir) / "prompts.jsonl").string();
  const std::string verdicts_path = (fs::path(config.out_dir) / "verdicts.jsonl").string();
  const std::string report_path = (fs::path(config.out_dir) / "report.json").string();
  const std::string confusion_path = (fs::path(config.out_dir) / "confusion.txt").string();

  RunManifest manifest;
  manifest.config_snapshot = config_to_json(config);
  manifest.stage_versions = {{"ingest", "1"},        {"retrieve", "1"}, {"build-prompts", "1"},
                             {"predict", "1"},       {"evaluate", "1"}};
  StageState state = StageState::load(config.out_dir);

  // ingest
  run_stage("ingest", manifest, [&] {
    std::string in_hash = content_hash(config.claims_path) + ":" + config.dataset;
    manifest.input_hashes["ingest"] = in_hash;
    if (state.fresh("ingest", in_hash, {normalized_path})) {
      manifest.stage_skipped["ingest"] = true;
      return;
    }
    manifest.stage_skipped["ingest"] = false;
    DatasetSplit split = ingest_claims(config.dataset, config.claims_path);
    save_normalized(split, config.dataset, normalized_path);
    state.mark("ingest", in_hash);
    state.save();
  });

  DatasetSplit split = load_normalized(normalized_path, config.dataset);
  std::vector<Claim> claims = select_partition(split, config.partition);
  manifest.counts.claims_in = claims.size();

  // retrieve
  run_stage("retrieve", manifest, [&] {
    json settings = manifest.config_snapshot["search"];
    settings["filter"] = manifest.config_snapshot["filter"];
    settings["partition"] = config.partition;
    std::string in_hash = content_hash(normalized_path) + ":" + sha256_hex(settings.dump());
    manifest.input_hashes["retrieve"] = in_hash;
    if (state.fresh("retrieve", in_hash, {bundles_path})) {
      manifest.stage_skipped["retrieve"] = true;
      json counts = state.data["retrieve"].value("counts", json::object());
      manifest.counts.evidence_kept = counts.value("kept", 0);
      manifest.counts.dropped_blocked_domain = counts.value("dropped_blocked_domain", 0);
      manifest.counts.dropped_post_dated = counts.value("dropped_post_dated", 0);
      manifest.counts.dropped_undated = counts.value("dropped_undated", 0);
      manifest.counts.undated_kept = counts.value("undated_kept", 0);
      manifest.counts.evidence_retrieved =
          manifest.counts.evidence_kept + manifest.counts.dropped_blocked_domain +
          manifest.counts.dropped_post_dated + manifest.counts.dropped_undated;
      return;
    }
    manifest.stage_skipped["retrieve"] = false;
    if (config.cache_dir.empty()) throw std::runtime_error("config.cache_dir is not set");
    auto cache = std::make_shared<SearchCache>(config.cache_dir);
    std::shared_ptr<SearchProvider> provider = make_provider(config.search);
    SearchClient client(provider, cache, RetryPolicy{}, config.search.offline,
                        config.search.provider);
    FilterStats stats;
    std::vector<EvidenceBundle> bundles = retrieve_all(claims, client, config.filter,
                                                       config.search.max_results,
                                                       config.search.concurrency, &stats);
    save_bundles(bundles, bundles_path);
    manifest.counts.evidence_kept = stats.kept;
    manifest.counts.dropped_blocked_domain = stats.dropped_blocked_domain;
    manifest.counts.dropped_post_dated = stats.dropped_post_dated;
    manifest.counts.dropped_undated = stats.dropped_undated;
    manifest.counts.undated_kept = stats.undated_kept;
    manifest.counts.evidence_retrieved =
        stats.kept + stats.dropped_blocked_domain + stats.dropped_post_dated + stats.dropped_undated;
    state.mark("retrieve", in_hash);
    state.data["retrieve"]["counts"] = {
        {"kept", stats.kept},
        {"dropped_blocked_domain", stats.dropped_blocked_domain},
        {"dropped_post_dated", stats.dropped_post_dated},
        {"dropped_undated", stats.dropped_undated},
        {"undated_kept", stats.undated_kept}};
    state.save();
  });

  std::map<std::string, EvidenceBundle> bundles;
  for (EvidenceBundle& b : load_bundles(bundles_path)) bundles[b.claim_id] = std::move(b);

  // build-prompts
  run_stage("build-prompts", manifest, [&] {
    std::string in_hash = content_hash(normalized_path) + ":" + content_hash(bundles_path) + ":" +
                          sha256_hex(template_to_json(tmpl).dump());
    manifest.input_hashes["build-prompts"] = in_hash;
    if (state.fresh("build-prompts", in_hash, {prompts_path})) {
      manifest.stage_skipped["build-prompts"] = true;
      return;
    }
    manifest.stage_skipped["build-prompts"] = false;
    std::vector<TuningExample> examples = build_training_set(claims, bundles, tmpl);
    std::vector<json> records;
    records.reserve(examples.size());
    for (const TuningExample& e : examples) records.push_back(tuning_example_to_json(e));
    write_jsonl(prompts_path, records);
    state.mark("build-prompts", in_hash);
    state.save();
  });

  // predict
  run_stage("predict", manifest, [&] {
    json settings = manifest.config_snapshot["backend"];
    settings["decode"] = manifest.config_snapshot["decode"];
    std::string in_hash = content_hash(prompts_path) + ":" + sha256_hex(settings.dump());
    manifest.input_hashes["predict"] = in_hash;
    if (!state.fresh("predict", in_hash, {verdicts_path})) {
      manifest.stage_skipped["predict"] = false;
      std::unique_ptr<TextBackend> backend = make_backend(config.backend, taxonomy);
      std::vector<Verdict> verdicts =
          predict_batch(claims, bundles, tmpl, *backend, config.decode, taxonomy);
      save_verdicts(verdicts, verdicts_path);
      state.mark("predict", in_hash);
      state.save();
    } else {
      manifest.stage_skipped["predict"] = true;
    }
    for (const Verdict& v : load_verdicts(verdicts_path, taxonomy))
      v.status == ParseStatus::Unparsed ? ++manifest.counts.verdicts_unparsed
                                        : ++manifest.counts.verdicts_parsed;
  });

  // evaluate
  run_stage("evaluate", manifest, [&] {
    std::string in_hash = content_hash(verdicts_path) + ":" + content_hash(normalized_path);
    manifest.input_hashes["evaluate"] = in_hash;
    std::vector<Verdict> verdicts = load_verdicts(verdicts_path, taxonomy);
    if (verdicts.size() != claims.size())
      throw std::runtime_error("verdict count " + std::to_string(verdicts.size()) +
                               " does not match claim count " + std::to_string(claims.size()));
    std::vector<VeracityLabel> golds;
    golds.reserve(claims.size());
    for (const Claim& c : claims) golds.push_back(c.label);
    ConfusionMatrix cm = confusion(golds, verdicts, taxonomy);
    manifest.report = macro_metrics(cm);
    json report = report_to_json(manifest.report);
    report["confusion"] = confusion_to_json(cm);
    write_file(report_path, report.dump(2) + "\n");
    write_file(confusion_path, render_confusion(cm));
    manifest.stage_skipped["evaluate"] = false;
    state.mark("evaluate", in_hash);
    state.save();
  });

  write_file((fs::path(config.out_dir) / "manifest.json").string(),
             manifest.to_json().dump(2) + "\n");
  return manifest;
}

}  // namespace factcheck
