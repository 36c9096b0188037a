#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "factcheck/corpus.hpp"
#include "factcheck/promptgen.hpp"

namespace factcheck {

struct DecodeParams {
  int max_new_tokens = 16;
  double temperature = 0.0;  // 0 = greedy
  std::vector<std::string> stop = {"\n"};
};

enum class ParseStatus { Exact, Fuzzy, Unparsed };

std::string to_string(ParseStatus s);
ParseStatus parse_status_from_string(const std::string& s);

struct Verdict {
  std::string claim_id;
  std::string raw_text;
  std::optional<VeracityLabel> label;  // absent iff status == Unparsed
  ParseStatus status = ParseStatus::Unparsed;
  std::string note;  // transport/error context for failed batch entries

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// A generation request; claim_id is context for rule-based backends.
struct GenRequest {
  std::string prompt;
  std::string claim_id;
};

class TextBackend {
 public:
  virtual ~TextBackend() = default;
  virtual std::string name() const = 0;
  virtual std::string generate(const GenRequest& request, const DecodeParams& params) = 0;
  /// Backends that are not safe for concurrent generate calls return 1.
  virtual int max_concurrency() const { return 8; }
};

struct HttpBackendConfig {
  std::string base_url;  // e.g. http://localhost:8000
  std::string path = "/v1/completions";
  std::string api_key;  // optional bearer token, from environment
  std::string model = "llama-7b";
  int timeout_seconds = 120;
  int attempts = 3;
  double initial_backoff_seconds = 1.0;
};

/// Completions-style endpoint: POST {model, prompt, max_tokens, temperature,
/// stop}; generated text read from choices[0].text.
class HttpCompletionBackend : public TextBackend {
 public:
  explicit HttpCompletionBackend(HttpBackendConfig config);
  std::string name() const override { return "http"; }
  std::string generate(const GenRequest& request, const DecodeParams& params) override;

 private:
  HttpBackendConfig config_;
};

/// Rule-based mock: answers from a claim_id -> canned text lookup.
class RuleMockBackend : public TextBackend {
 public:
  explicit RuleMockBackend(std::map<std::string, std::string> answers);
  static RuleMockBackend from_file(const std::string& path);
  std::string name() const override { return "mock-rule"; }
  std::string generate(const GenRequest& request, const DecodeParams& params) override;

 private:
  std::map<std::string, std::string> answers_;
};

/// Deterministic mock keyed by prompt hash: an optional prompt-hash -> text
/// lookup, falling back to a hash-selected entry from a response pool.
class PromptHashMockBackend : public TextBackend {
 public:
  PromptHashMockBackend(std::map<std::string, std::string> lookup,
                        std::vector<std::string> response_pool);
  std::string name() const override { return "mock-hash"; }
  std::string generate(const GenRequest& request, const DecodeParams& params) override;

 private:
  std::map<std::string, std::string> lookup_;
  std::vector<std::string> pool_;
};

/// Lowercase, punctuation to spaces, collapsed whitespace. Verdict matching
/// happens on this form.
std::string normalize_for_parse(const std::string& text);

/// Total function: exact whole-string match against any verbalization, else
/// longest word-bounded verbalization substring (ties to the earliest
/// position), else unparsed.
Verdict parse_verdict(const std::string& text, const VeracityTaxonomy& taxonomy);

Verdict predict(const Claim& claim, const EvidenceBundle& bundle, const PromptTemplate& tmpl,
                TextBackend& backend, const DecodeParams& decode, const VeracityTaxonomy& taxonomy);

struct BatchOptions {
  bool fail_fast = false;
  int concurrency = 4;
};

/// Output order equals input order; per-claim failures become unparsed
/// verdicts with an error note unless fail_fast is set.
std::vector<Verdict> predict_batch(const std::vector<Claim>& claims,
                                   const std::map<std::string, EvidenceBundle>& bundles,
                                   const PromptTemplate& tmpl, TextBackend& backend,
                                   const DecodeParams& decode, const VeracityTaxonomy& taxonomy,
                                   const BatchOptions& options = {});

json verdict_to_json(const Verdict& v);
Verdict verdict_from_json(const json& j, const VeracityTaxonomy& taxonomy);
void save_verdicts(const std::vector<Verdict>& verdicts, const std::string& path);
std::vector<Verdict> load_verdicts(const std::string& path, const VeracityTaxonomy& taxonomy);

}  // namespace factcheck
