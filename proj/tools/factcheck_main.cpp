#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <random>

#include "factcheck/eval.hpp"
#include "factcheck/lora.hpp"
#include "factcheck/pipeline.hpp"

namespace fs = std::filesystem;
using namespace factcheck;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitStageFailure = 2;

DatasetSplit load_claims_any(const std::string& dataset, const std::string& path) {
  return ingest_claims(dataset, path);
}

int cmd_ingest(const std::string& dataset, const std::string& path, const std::string& out) {
  DatasetSplit split = dataset == "liar" ? load_liar(path) : load_rawfc(path);
  save_normalized(split, dataset, out);
  auto stats = split_stats(split);
  std::cout << "ingested " << split.total() << " claims -> " << out << "\n";
  for (const auto& [part, labels] : stats) {
    std::size_t n = 0;
    for (const auto& [label, count] : labels) n += count;
    std::cout << "  " << part << ": " << n << "\n";
  }
  return kExitOk;
}

int cmd_retrieve(const std::string& dataset, const std::string& claims_path,
                 const std::string& out, const std::string& cache_dir, int max_results,
                 bool offline, const std::string& provider_name, const std::string& fixture_path,
                 int concurrency, const std::string& partition) {
  DatasetSplit split = load_claims_any(dataset, claims_path);
  std::vector<Claim> claims = select_partition(split, partition);

  SearchSettings settings;
  settings.provider = provider_name;
  settings.fixture_path = fixture_path;
  settings.max_results = max_results;
  settings.offline = offline;
  settings.concurrency = concurrency;
  auto cache = std::make_shared<SearchCache>(cache_dir);
  std::shared_ptr<SearchProvider> provider = make_provider(settings);
  SearchClient client(provider, cache, RetryPolicy{}, offline);

  FilterStats stats;
  std::vector<EvidenceBundle> bundles =
      retrieve_all(claims, client, FilterPolicy::defaults(), max_results, concurrency, &stats);
  save_bundles(bundles, out);
  std::cout << "retrieved evidence for " << claims.size() << " claims -> " << out << "\n"
            << "  kept " << stats.kept << ", blocked-domain " << stats.dropped_blocked_domain
            << ", post-dated " << stats.dropped_post_dated << ", undated dropped "
            << stats.dropped_undated << ", undated kept " << stats.undated_kept << "\n";
  return kExitOk;
}

int cmd_build_prompts(const std::string& dataset, const std::string& claims_path,
                      const std::string& bundles_path, const std::string& template_path,
                      const std::string& out, const std::string& partition) {
  DatasetSplit split = load_claims_any(dataset, claims_path);
  std::vector<Claim> claims = select_partition(split, partition);
  std::map<std::string, EvidenceBundle> bundles;
  for (EvidenceBundle& b : load_bundles(bundles_path)) bundles[b.claim_id] = std::move(b);
  PromptTemplate tmpl = template_path.empty()
                            ? PromptTemplate::defaults_for(taxonomy_of(dataset))
                            : load_template_file(template_path);
  if (tmpl.instruction_text.empty())
    tmpl.instruction_text = PromptTemplate::defaults_for(taxonomy_of(dataset)).instruction_text;
  std::vector<TuningExample> examples = build_training_set(claims, bundles, tmpl);
  std::vector<json> records;
  for (const TuningExample& e : examples) records.push_back(tuning_example_to_json(e));
  write_jsonl(out, records);
  std::cout << "built " << examples.size() << " prompts -> " << out << "\n";
  return kExitOk;
}

int cmd_export_train(const std::string& dataset, const std::string& claims_path,
                     const std::string& bundles_path, const std::string& template_path,
                     const std::string& out, const std::string& partition) {
  DatasetSplit split = load_claims_any(dataset, claims_path);
  std::vector<Claim> claims = select_partition(split, partition);
  std::map<std::string, EvidenceBundle> bundles;
  for (EvidenceBundle& b : load_bundles(bundles_path)) bundles[b.claim_id] = std::move(b);
  PromptTemplate tmpl = template_path.empty()
                            ? PromptTemplate::defaults_for(taxonomy_of(dataset))
                            : load_template_file(template_path);
  if (tmpl.instruction_text.empty())
    tmpl.instruction_text = PromptTemplate::defaults_for(taxonomy_of(dataset)).instruction_text;
  std::vector<TuningExample> examples = build_training_set(claims, bundles, tmpl);
  export_training_set(examples, claims, bundles, tmpl, out);
  std::cout << "exported " << examples.size() << " records -> " << out << " (+ " << out
            << ".meta.json)\n";
  return kExitOk;
}

int cmd_predict(const std::string& prompts_path, const std::string& backend_kind,
                const std::string& lookup_path, const std::string& out,
                const std::string& taxonomy_name) {
  const VeracityTaxonomy& taxonomy = taxonomy_of(taxonomy_name);
  BackendSettings settings;
  settings.kind = backend_kind == "mock" ? "mock-rule" : backend_kind;
  settings.lookup_path = lookup_path;
  std::unique_ptr<TextBackend> backend = make_backend(settings, taxonomy);

  DecodeParams decode;
  std::vector<Verdict> verdicts;
  for (const json& r : read_jsonl(prompts_path)) {
    std::string claim_id = r.at("claim_id").get<std::string>();
    std::string prompt = r.at("prompt").get<std::string>();
    Verdict v;
    try {
      std::string raw = backend->generate({prompt, claim_id}, decode);
      std::string clipped = raw;
      for (const std::string& s : decode.stop)
        if (auto pos = clipped.find(s); pos != std::string::npos) clipped = clipped.substr(0, pos);
      v = parse_verdict(clipped, taxonomy);
      v.raw_text = raw;
    } catch (const std::exception& e) {
      v.status = ParseStatus::Unparsed;
      v.note = e.what();
    }
    v.claim_id = claim_id;
    verdicts.push_back(std::move(v));
  }
  save_verdicts(verdicts, out);
  std::cout << "predicted " << verdicts.size() << " verdicts -> " << out << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& verdicts_path, const std::string& golds_path,
                 const std::string& taxonomy_name, const std::string& out, bool with_reference) {
  const VeracityTaxonomy& taxonomy = taxonomy_of(taxonomy_name);
  std::vector<Verdict> verdicts = load_verdicts(verdicts_path, taxonomy);
  DatasetSplit split = load_normalized(golds_path, taxonomy_name);
  std::map<std::string, VeracityLabel> gold_by_id;
  for (const Claim& c : select_partition(split, "all")) gold_by_id.emplace(c.id, c.label);

  std::vector<VeracityLabel> golds;
  for (const Verdict& v : verdicts) {
    auto it = gold_by_id.find(v.claim_id);
    if (it == gold_by_id.end())
      throw std::runtime_error("no gold label for claim " + v.claim_id + " in " + golds_path);
    golds.push_back(it->second);
  }

  ConfusionMatrix cm = confusion(golds, verdicts, taxonomy);
  MetricsReport report = macro_metrics(cm);

  std::vector<ReferenceRow> reference;
  if (with_reference)
    for (const ReferenceRow& r : reference_results())
      if (r.dataset == taxonomy_name) reference.push_back(r);

  std::cout << render_results(report, reference) << "\n" << render_confusion(cm);
  if (!out.empty()) {
    json j = report_to_json(report);
    j["confusion"] = confusion_to_json(cm);
    write_file(out, j.dump(2) + "\n");
    std::cout << "report written to " << out << "\n";
  }
  return kExitOk;
}

int cmd_run(const std::string& config_path, const std::map<std::string, std::string>& overrides) {
  PipelineConfig config = load_config(config_path);
  auto ov = [&](const char* key) -> std::optional<std::string> {
    auto it = overrides.find(key);
    if (it == overrides.end() || it->second.empty()) return std::nullopt;
    return it->second;
  };
  if (auto v = ov("dataset")) config.dataset = *v;
  if (auto v = ov("claims")) config.claims_path = *v;
  if (auto v = ov("out-dir")) config.out_dir = *v;
  if (auto v = ov("cache-dir")) config.cache_dir = *v;
  if (auto v = ov("partition")) config.partition = *v;
  if (auto v = ov("backend")) config.backend.kind = *v;
  if (auto v = ov("max-results")) config.search.max_results = std::stoi(*v);
  if (auto v = ov("offline")) config.search.offline = *v == "1";

  RunManifest manifest = run_pipeline(config);
  std::cout << "pipeline complete: " << manifest.counts.claims_in << " claims, "
            << manifest.counts.verdicts_parsed << " parsed / "
            << manifest.counts.verdicts_unparsed << " unparsed verdicts\n";
  std::vector<ReferenceRow> reference;
  if (config.with_reference)
    for (const ReferenceRow& r : reference_results())
      if (r.dataset == config.dataset) reference.push_back(r);
  std::cout << render_results(manifest.report, reference);
  std::cout << "outputs under " << config.out_dir << "\n";
  return kExitOk;
}

int cmd_lora_demo(unsigned long seed, int rank, int epochs, int batch_size, double lr,
                  const std::string& checkpoint_out) {
  using namespace factcheck::lora;
  SyntheticSet data = make_synthetic_classification(200, 8, seed);
  ToyModel model = make_toy_model({8, 16, 2}, {Activation::Tanh, Activation::Identity}, seed + 1);
  attach_adapters(model, rank, /*alpha=*/static_cast<double>(rank), /*dropout_p=*/0.05, seed + 2);

  ParamCounts counts = param_count(model);
  std::cout << "parameters: base " << counts.base << ", trainable (low-rank) "
            << counts.trainable_lora << "\n";

  GradCheckReport check = gradient_check(model, {data.xs.begin(), data.xs.begin() + 8},
                                         {data.ys.begin(), data.ys.begin() + 8});
  std::cout << "gradient check: " << check.params_checked
            << " parameters, max relative error " << check.max_rel_error << "\n";

  TrainConfig config;
  config.epochs = epochs;
  config.batch_size = batch_size;
  config.lr0 = lr;
  config.dropout_p = 0.05;
  config.seed = seed;
  TrainLog log = train(model, data.xs, data.ys, config);
  std::cout << "training (" << log.steps << " steps):\n";
  for (std::size_t e = 0; e < log.epoch_loss.size(); ++e)
    std::cout << "  epoch " << e + 1 << ": loss " << log.epoch_loss[e] << "\n";
  std::cout << "  lr schedule: first " << log.lr_applied.front() << ", last "
            << log.lr_applied.back() << "\n";

  // Merge-equivalence report over the first trained layer.
  const ModelLayer& layer = model.layers.front();
  DenseLayer merged = merge(layer.base, *layer.adapter);
  std::mt19937_64 rng(seed + 3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double max_diff = 0.0;
  for (int i = 0; i < 100; ++i) {
    Vector x = Vector::NullaryExpr(layer.base.in_dim(), [&] { return gauss(rng); });
    Vector a = adapter_forward(layer.base, *layer.adapter, x, false);
    Vector m = merged.forward(x);
    max_diff = std::max(max_diff, (a - m).cwiseAbs().maxCoeff());
  }
  std::cout << "merge equivalence: max |adapter - merged| over 100 random inputs = " << max_diff
            << "\n";

  if (!checkpoint_out.empty()) {
    save_checkpoint(model, checkpoint_out);
    std::cout << "checkpoint written to " << checkpoint_out << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fact-checking pipeline with retrieved evidence and a low-rank adaptation lab"};
  app.require_subcommand(1);

  // ingest
  std::string dataset = "rawfc", path, out, claims_path, bundles_path, template_path;
  auto* ingest = app.add_subcommand("ingest", "load a dataset into the normalized claim form");
  ingest->add_option("--dataset", dataset, "liar or rawfc")->required();
  ingest->add_option("--path", path, "dataset file or directory")->required();
  ingest->add_option("--out", out, "normalized output file")->required();

  // retrieve
  std::string cache_dir, provider_name = "google", fixture_path, partition = "all";
  int max_results = 10, concurrency = 4;
  bool offline = false;
  auto* retrieve = app.add_subcommand("retrieve", "fetch and filter search evidence per claim");
  retrieve->add_option("--dataset", dataset, "liar or rawfc");
  retrieve->add_option("--claims", claims_path, "normalized claims file")->required();
  retrieve->add_option("--out", out, "bundles output file")->required();
  retrieve->add_option("--max-results", max_results, "results per query");
  retrieve->add_option("--cache-dir", cache_dir, "search cache directory")->required();
  retrieve->add_option("--provider", provider_name, "google or fixture");
  retrieve->add_option("--fixture", fixture_path, "fixture file for the fixture provider");
  retrieve->add_option("--concurrency", concurrency, "max in-flight searches");
  retrieve->add_option("--partition", partition, "train, validation, test, or all");
  retrieve->add_flag("--offline", offline, "fail on cache miss instead of using the network");

  // build-prompts
  auto* build = app.add_subcommand("build-prompts", "assemble instruction-evidence-input prompts");
  build->add_option("--dataset", dataset, "liar or rawfc");
  build->add_option("--claims", claims_path, "normalized claims file")->required();
  build->add_option("--bundles", bundles_path, "evidence bundles file")->required();
  build->add_option("--template", template_path, "prompt template file");
  build->add_option("--out", out, "prompts output file")->required();
  build->add_option("--partition", partition, "train, validation, test, or all");

  // export-train
  auto* export_train = app.add_subcommand("export-train", "export instruction-tuning records");
  export_train->add_option("--dataset", dataset, "liar or rawfc");
  export_train->add_option("--claims", claims_path, "normalized claims file")->required();
  export_train->add_option("--bundles", bundles_path, "evidence bundles file")->required();
  export_train->add_option("--template", template_path, "prompt template file");
  export_train->add_option("--partition", partition, "partition to export (default train)");
  export_train->add_option("--out", out, "training records output file")->required();

  // predict
  std::string backend_kind = "mock", lookup_path, taxonomy_name = "rawfc", prompts_path;
  auto* predict_cmd = app.add_subcommand("predict", "generate and parse verdicts for prompts");
  predict_cmd->add_option("--prompts", prompts_path, "assembled prompts file")->required();
  predict_cmd->add_option("--backend", backend_kind, "http, mock (rule-based), or mock-hash");
  predict_cmd->add_option("--lookup", lookup_path, "mock answer lookup file");
  predict_cmd->add_option("--taxonomy", taxonomy_name, "rawfc or liar");
  predict_cmd->add_option("--out", out, "verdicts output file")->required();

  // evaluate
  std::string verdicts_path, golds_path;
  bool with_reference = false;
  auto* evaluate = app.add_subcommand("evaluate", "confusion matrix and macro P/R/F1");
  evaluate->add_option("--verdicts", verdicts_path, "verdicts file")->required();
  evaluate->add_option("--golds", golds_path, "normalized claims file with gold labels")->required();
  evaluate->add_option("--taxonomy", taxonomy_name, "rawfc or liar")->required();
  evaluate->add_option("--out", out, "report output file");
  evaluate->add_flag("--with-reference", with_reference, "print published reference rows");

  // run
  std::string config_path;
  std::map<std::string, std::string> overrides;
  auto* run = app.add_subcommand("run", "full pipeline from a config file");
  run->add_option("--config", config_path, "pipeline config file")->required();
  for (const char* key : {"dataset", "claims", "out-dir", "cache-dir", "partition", "backend",
                          "max-results", "offline"})
    run->add_option("--" + std::string(key), overrides[key], "override config " + std::string(key));

  // lora-demo
  unsigned long seed = 42;
  int rank = 2, epochs = 3, batch_size = 32;
  double lr = 1e-4;
  std::string checkpoint_out;
  auto* demo = app.add_subcommand("lora-demo", "synthetic low-rank adaptation training demo");
  demo->add_option("--seed", seed, "rng seed");
  demo->add_option("--rank", rank, "adapter rank");
  demo->add_option("--epochs", epochs, "training epochs");
  demo->add_option("--batch-size", batch_size, "minibatch size");
  demo->add_option("--lr", lr, "initial learning rate");
  demo->add_option("--checkpoint", checkpoint_out, "write the trained model here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(dataset, path, out);
    if (*retrieve)
      return cmd_retrieve(dataset, claims_path, out, cache_dir, max_results, offline,
                          provider_name, fixture_path, concurrency, partition);
    if (*build)
      return cmd_build_prompts(dataset, claims_path, bundles_path, template_path, out, partition);
    if (*export_train) {
      if (!export_train->count("--partition")) partition = "train";
      return cmd_export_train(dataset, claims_path, bundles_path, template_path, out, partition);
    }
    if (*predict_cmd)
      return cmd_predict(prompts_path, backend_kind, lookup_path, out, taxonomy_name);
    if (*evaluate)
      return cmd_evaluate(verdicts_path, golds_path, taxonomy_name, out, with_reference);
    if (*run) return cmd_run(config_path, overrides);
    if (*demo) return cmd_lora_demo(seed, rank, epochs, batch_size, lr, checkpoint_out);
  } catch (const std::exception& e) {
    std::string what = e.what();
    std::cerr << "error: " << what << "\n";
    bool validation = what.find("invalid config") != std::string::npos ||
                      what.find("unknown dataset") != std::string::npos ||
                      what.find("unknown taxonomy") != std::string::npos;
    return validation ? kExitValidation : kExitStageFailure;
  }
  return kExitOk;
}
