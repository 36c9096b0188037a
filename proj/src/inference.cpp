#include "factcheck/inference.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <stdexcept>
#include <thread>

namespace factcheck {

std::string to_string(ParseStatus s) {
  switch (s) {
    case ParseStatus::Exact: return "exact";
    case ParseStatus::Fuzzy: return "fuzzy";
    case ParseStatus::Unparsed: return "unparsed";
  }
  return "unparsed";
}

ParseStatus parse_status_from_string(const std::string& s) {
  if (s == "exact") return ParseStatus::Exact;
  if (s == "fuzzy") return ParseStatus::Fuzzy;
  if (s == "unparsed") return ParseStatus::Unparsed;
  throw std::runtime_error("unknown parse status \"" + s + "\"");
}

std::string normalize_for_parse(const std::string& text) {
  std::string mapped;
  mapped.reserve(text.size());
  for (char c : text) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u))
      mapped.push_back(static_cast<char>(std::tolower(u)));
    else
      mapped.push_back(' ');
  }
  return normalize_whitespace(mapped);
}

namespace {

bool word_bounded_at(const std::string& text, std::size_t pos, std::size_t len) {
  bool left_ok = pos == 0 || text[pos - 1] == ' ';
  bool right_ok = pos + len == text.size() || text[pos + len] == ' ';
  return left_ok && right_ok;
}

}  // namespace

Verdict parse_verdict(const std::string& text, const VeracityTaxonomy& taxonomy) {
  Verdict v;
  v.raw_text = text;
  std::string norm = normalize_for_parse(text);

  // Exact: whole normalized string equals a verbalization.
  for (const VeracityLabel& label : taxonomy.labels())
    for (const std::string& verb : taxonomy.verbalizations(label))
      if (norm == normalize_for_parse(verb)) {
        v.label = label;
        v.status = ParseStatus::Exact;
        return v;
      }

  // Fuzzy: longest word-bounded occurrence; ties by earliest position, then
  // by taxonomy ordinal for determinism.
  struct Match {
    std::size_t len;
    std::size_t pos;
    const VeracityLabel* label;
  };
  std::optional<Match> best;
  for (const VeracityLabel& label : taxonomy.labels()) {
    for (const std::string& verb : taxonomy.verbalizations(label)) {
      std::string needle = normalize_for_parse(verb);
      if (needle.empty()) continue;
      std::size_t pos = 0;
      while ((pos = norm.find(needle, pos)) != std::string::npos) {
        if (word_bounded_at(norm, pos, needle.size())) {
          Match m{needle.size(), pos, &label};
          if (!best || m.len > best->len || (m.len == best->len && m.pos < best->pos))
            best = m;
        }
        ++pos;
      }
    }
  }
  if (best) {
    v.label = *best->label;
    v.status = ParseStatus::Fuzzy;
  } else {
    v.status = ParseStatus::Unparsed;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Backends

HttpCompletionBackend::HttpCompletionBackend(HttpBackendConfig config)
    : config_(std::move(config)) {}

std::string HttpCompletionBackend::generate(const GenRequest& request, const DecodeParams& params) {
  json body;
  body["model"] = config_.model;
  body["prompt"] = request.prompt;
  body["max_tokens"] = params.max_new_tokens;
  body["temperature"] = params.temperature;
  body["stop"] = params.stop;

  std::exception_ptr last;
  for (int attempt = 0; attempt < config_.attempts; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(
          std::chrono::duration<double>(config_.initial_backoff_seconds * (1 << (attempt - 1))));
    try {
      httplib::Client client(config_.base_url);
      client.set_connection_timeout(config_.timeout_seconds);
      client.set_read_timeout(config_.timeout_seconds);
      httplib::Headers headers;
      if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);
      auto res = client.Post(config_.path, headers, body.dump(), "application/json");
      if (!res)
        throw std::runtime_error("backend transport error: " + httplib::to_string(res.error()));
      if (res->status < 200 || res->status >= 300)
        throw std::runtime_error("backend HTTP " + std::to_string(res->status) + ": " +
                                 res->body.substr(0, 512));
      json parsed = json::parse(res->body);
      if (!parsed.contains("choices") || parsed.at("choices").empty())
        throw std::runtime_error("backend response missing choices: " + res->body.substr(0, 512));
      return parsed.at("choices")[0].at("text").get<std::string>();
    } catch (...) {
      last = std::current_exception();
    }
  }
  std::rethrow_exception(last);
}

RuleMockBackend::RuleMockBackend(std::map<std::string, std::string> answers)
    : answers_(std::move(answers)) {}

RuleMockBackend RuleMockBackend::from_file(const std::string& path) {
  json j = json::parse(read_file(path));
  std::map<std::string, std::string> answers;
  for (const auto& [k, v] : j.items()) answers[k] = v.get<std::string>();
  return RuleMockBackend(std::move(answers));
}

std::string RuleMockBackend::generate(const GenRequest& request, const DecodeParams&) {
  auto it = answers_.find(request.claim_id);
  if (it == answers_.end())
    throw std::runtime_error("mock backend has no answer for claim " + request.claim_id);
  return it->second;
}

PromptHashMockBackend::PromptHashMockBackend(std::map<std::string, std::string> lookup,
                                             std::vector<std::string> response_pool)
    : lookup_(std::move(lookup)), pool_(std::move(response_pool)) {
  if (pool_.empty()) pool_ = {"true", "false"};
}

std::string PromptHashMockBackend::generate(const GenRequest& request, const DecodeParams&) {
  std::string key = sha256_hex(request.prompt);
  if (auto it = lookup_.find(key); it != lookup_.end()) return it->second;
  // Deterministic selection from the pool by the first 8 hex digits.
  std::size_t idx = std::stoull(key.substr(0, 8), nullptr, 16) % pool_.size();
  return pool_[idx];
}

// ---------------------------------------------------------------------------
// Prediction

namespace {

std::string apply_stop(std::string text, const std::vector<std::string>& stops) {
  for (const std::string& s : stops) {
    if (s.empty()) continue;
    if (auto pos = text.find(s); pos != std::string::npos) text = text.substr(0, pos);
  }
  return text;
}

}  // namespace

Verdict predict(const Claim& claim, const EvidenceBundle& bundle, const PromptTemplate& tmpl,
                TextBackend& backend, const DecodeParams& decode,
                const VeracityTaxonomy& taxonomy) {
  AssembledPrompt prompt = assemble_prompt(claim, bundle, tmpl);
  std::string raw = backend.generate({prompt.text, claim.id}, decode);
  Verdict v = parse_verdict(apply_stop(raw, decode.stop), taxonomy);
  v.claim_id = claim.id;
  v.raw_text = raw;  // verbatim, pre-stop
  return v;
}

std::vector<Verdict> predict_batch(const std::vector<Claim>& claims,
                                   const std::map<std::string, EvidenceBundle>& bundles,
                                   const PromptTemplate& tmpl, TextBackend& backend,
                                   const DecodeParams& decode, const VeracityTaxonomy& taxonomy,
                                   const BatchOptions& options) {
  std::vector<Verdict> out(claims.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= claims.size()) return;
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      const Claim& claim = claims[i];
      try {
        auto bit = bundles.find(claim.id);
        if (bit == bundles.end())
          throw std::runtime_error("no evidence bundle for claim " + claim.id);
        out[i] = predict(claim, bit->second, tmpl, backend, decode, taxonomy);
      } catch (const std::exception& e) {
        if (options.fail_fast) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
        Verdict v;
        v.claim_id = claim.id;
        v.status = ParseStatus::Unparsed;
        v.note = e.what();
        out[i] = std::move(v);
      }
    }
  };

  int limit = std::max(1, std::min(options.concurrency, backend.max_concurrency()));
  int n_threads = std::max(1, std::min<int>(limit, static_cast<int>(claims.size())));
  std::vector<std::thread> threads;
  for (int i = 0; i < n_threads; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

json verdict_to_json(const Verdict& v) {
  json j;
  j["claim_id"] = v.claim_id;
  j["raw_text"] = v.raw_text;
  if (v.label) j["label"] = v.label->canonical_name;
  j["parse_status"] = to_string(v.status);
  if (!v.note.empty()) j["note"] = v.note;
  return j;
}

Verdict verdict_from_json(const json& j, const VeracityTaxonomy& taxonomy) {
  Verdict v;
  v.claim_id = j.at("claim_id").get<std::string>();
  v.raw_text = j.value("raw_text", std::string{});
  v.status = parse_status_from_string(j.at("parse_status").get<std::string>());
  if (j.contains("label")) v.label = taxonomy.require(j.at("label").get<std::string>());
  if ((v.status == ParseStatus::Unparsed) != !v.label)
    throw std::runtime_error("verdict for claim " + v.claim_id + ": label/status mismatch");
  v.note = j.value("note", std::string{});
  return v;
}

void save_verdicts(const std::vector<Verdict>& verdicts, const std::string& path) {
  std::vector<json> records;
  records.reserve(verdicts.size());
  for (const Verdict& v : verdicts) records.push_back(verdict_to_json(v));
  write_jsonl(path, records);
}

std::vector<Verdict> load_verdicts(const std::string& path, const VeracityTaxonomy& taxonomy) {
  std::vector<Verdict> out;
  for (const json& r : read_jsonl(path)) out.push_back(verdict_from_json(r, taxonomy));
  return out;
}

}  // namespace factcheck
