#include "factcheck/evidence.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <stdexcept>
#include <thread>

namespace fs = std::filesystem;

namespace factcheck {

FilterPolicy FilterPolicy::defaults() {
  FilterPolicy p;
  p.blocked_domains = {"snopes.com",      "politifact.com",  "factcheck.org",
                       "fullfact.org",    "leadstories.com", "checkyourfact.com"};
  p.enforce_date_ceiling = true;
  p.drop_undated = false;
  return p;
}

SearchQuery formulate_query(const Claim& claim, int max_results, std::size_t query_char_cap) {
  std::string text = normalize_whitespace(claim.text);
  if (text.size() > query_char_cap) {
    // Truncate on a word boundary at or before the cap.
    std::size_t cut = text.rfind(' ', query_char_cap);
    text = text.substr(0, cut == std::string::npos ? query_char_cap : cut);
  }
  return SearchQuery{text, max_results, claim.id};
}

std::string cache_key(const SearchQuery& query, const std::string& provider_name) {
  std::string material = provider_name + "\n" + normalize_whitespace(query.text) + "\n" +
                         std::to_string(query.max_results);
  return sha256_hex(material);
}

std::optional<std::string> extract_publish_date(const std::optional<std::string>& metadata_date,
                                                const std::string& snippet) {
  if (metadata_date) {
    std::string d = normalize_whitespace(*metadata_date);
    if (d.size() >= 10 && is_iso_date(d.substr(0, 10))) return d.substr(0, 10);
  }
  return parse_leading_month_date(snippet);
}

EvidenceBundle filter_evidence(const std::vector<RawSearchResult>& results, const Claim& claim,
                               const FilterPolicy& policy, FilterStats* stats) {
  FilterStats local;
  EvidenceBundle bundle;
  bundle.claim_id = claim.id;
  for (const RawSearchResult& r : results) {
    bool blocked = false;
    for (const std::string& d : policy.blocked_domains)
      if (domain_matches(r.source_domain, d)) {
        blocked = true;
        break;
      }
    if (blocked) {
      ++local.dropped_blocked_domain;
      continue;
    }
    if (!r.publish_date) {
      if (policy.drop_undated) {
        ++local.dropped_undated;
        continue;
      }
      ++local.undated_kept;
    } else if (policy.enforce_date_ceiling && claim.claim_date &&
               *r.publish_date > *claim.claim_date) {
      // Strictly after the claim date is removed; same-day is kept.
      ++local.dropped_post_dated;
      continue;
    }
    ++local.kept;
    bundle.snippets.push_back(r);
  }
  if (stats) {
    stats->kept += local.kept;
    stats->dropped_blocked_domain += local.dropped_blocked_domain;
    stats->dropped_post_dated += local.dropped_post_dated;
    stats->dropped_undated += local.dropped_undated;
    stats->undated_kept += local.undated_kept;
  }
  return bundle;
}

json search_result_to_json(const RawSearchResult& r) {
  json j;
  j["title"] = r.title;
  j["snippet"] = r.snippet;
  j["url"] = r.url;
  j["source_domain"] = r.source_domain;
  if (r.publish_date) j["publish_date"] = *r.publish_date;
  j["rank"] = r.rank;
  return j;
}

RawSearchResult search_result_from_json(const json& j) {
  RawSearchResult r;
  r.title = j.at("title").get<std::string>();
  r.snippet = j.at("snippet").get<std::string>();
  r.url = j.at("url").get<std::string>();
  r.source_domain = j.contains("source_domain") ? j.at("source_domain").get<std::string>()
                                                : domain_of_url(r.url);
  if (j.contains("publish_date") && !j.at("publish_date").is_null())
    r.publish_date = j.at("publish_date").get<std::string>();
  r.rank = j.at("rank").get<int>();
  return r;
}

json bundle_to_json(const EvidenceBundle& b) {
  json j;
  j["claim_id"] = b.claim_id;
  j["provider"] = b.provider;
  j["retrieved_at"] = b.retrieved_at;
  json snips = json::array();
  for (const RawSearchResult& r : b.snippets) snips.push_back(search_result_to_json(r));
  j["snippets"] = std::move(snips);
  return j;
}

EvidenceBundle bundle_from_json(const json& j) {
  EvidenceBundle b;
  b.claim_id = j.at("claim_id").get<std::string>();
  b.provider = j.value("provider", std::string{});
  b.retrieved_at = j.value("retrieved_at", std::string{});
  for (const json& r : j.at("snippets")) b.snippets.push_back(search_result_from_json(r));
  return b;
}

// ---------------------------------------------------------------------------
// Providers

namespace {

/// One provider item in the Google Programmable Search shape.
RawSearchResult parse_item(const json& item, int rank) {
  RawSearchResult r;
  r.title = item.value("title", std::string{});
  r.snippet = item.value("snippet", std::string{});
  r.url = item.value("link", std::string{});
  r.source_domain = domain_of_url(r.url);
  r.rank = rank;
  std::optional<std::string> meta_date;
  if (item.contains("pagemap") && item.at("pagemap").contains("metatags")) {
    static const char* keys[] = {"article:published_time", "og:published_time", "datepublished",
                                 "date", "dc.date"};
    for (const json& tags : item.at("pagemap").at("metatags")) {
      for (const char* k : keys)
        if (tags.contains(k) && tags.at(k).is_string()) {
          meta_date = tags.at(k).get<std::string>();
          break;
        }
      if (meta_date) break;
    }
  }
  r.publish_date = extract_publish_date(meta_date, r.snippet);
  return r;
}

std::vector<RawSearchResult> parse_items(const json& body, int max_results) {
  std::vector<RawSearchResult> out;
  if (!body.contains("items")) return out;
  int rank = 1;
  for (const json& item : body.at("items")) {
    if (static_cast<int>(out.size()) >= max_results) break;
    out.push_back(parse_item(item, rank++));
  }
  return out;
}

}  // namespace

HttpSearchProvider::HttpSearchProvider(HttpProviderConfig config) : config_(std::move(config)) {}

std::vector<RawSearchResult> HttpSearchProvider::parse_response(const std::string& body,
                                                                int max_results) {
  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed provider response: ") + e.what() +
                             "; payload: " + body.substr(0, 512));
  }
  return parse_items(parsed, max_results);
}

std::vector<RawSearchResult> HttpSearchProvider::fetch(const SearchQuery& query) {
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout_seconds);
  client.set_read_timeout(config_.timeout_seconds);
  httplib::Params params{{"q", query.text},
                         {"num", std::to_string(query.max_results)},
                         {"key", config_.api_key},
                         {"cx", config_.engine_id}};
  auto res = client.Get(config_.path, params, httplib::Headers{});
  if (!res)
    throw std::runtime_error("search transport error: " + httplib::to_string(res.error()));
  if (res->status == 429)
    throw std::runtime_error("search rate limited (HTTP 429): " + res->body.substr(0, 512));
  if (res->status < 200 || res->status >= 300)
    throw std::runtime_error("search HTTP " + std::to_string(res->status) + ": " +
                             res->body.substr(0, 512));
  return parse_response(res->body, query.max_results);
}

FixtureSearchProvider::FixtureSearchProvider(const std::string& fixture_path)
    : fixture_(json::parse(read_file(fixture_path))) {}

std::vector<RawSearchResult> FixtureSearchProvider::fetch(const SearchQuery& query) {
  const json* entry = nullptr;
  if (fixture_.contains(query.claim_id))
    entry = &fixture_.at(query.claim_id);
  else if (fixture_.contains(query.text))
    entry = &fixture_.at(query.text);
  if (!entry) return {};
  return parse_items(*entry, query.max_results);
}

// ---------------------------------------------------------------------------
// Cache

SearchCache::SearchCache(std::string dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
}

std::optional<CachedSearch> SearchCache::get(const std::string& key) const {
  fs::path p = fs::path(dir_) / (key + ".json");
  if (!fs::exists(p)) return std::nullopt;
  json j = json::parse(read_file(p.string()));
  CachedSearch entry;
  entry.provider = j.at("provider").get<std::string>();
  entry.query_text = j.at("query").get<std::string>();
  entry.max_results = j.at("max_results").get<int>();
  entry.retrieved_at = j.at("retrieved_at").get<std::string>();
  for (const json& r : j.at("results")) entry.results.push_back(search_result_from_json(r));
  return entry;
}

void SearchCache::put(const std::string& key, const CachedSearch& entry) {
  json j;
  j["provider"] = entry.provider;
  j["query"] = entry.query_text;
  j["max_results"] = entry.max_results;
  j["retrieved_at"] = entry.retrieved_at;
  json results = json::array();
  for (const RawSearchResult& r : entry.results) results.push_back(search_result_to_json(r));
  j["results"] = std::move(results);

  std::lock_guard lock(mutex_);
  fs::path final_path = fs::path(dir_) / (key + ".json");
  fs::path tmp_path = fs::path(dir_) / (key + ".tmp");
  write_file(tmp_path.string(), j.dump(2));
  fs::rename(tmp_path, final_path);
}

// ---------------------------------------------------------------------------
// Client

SearchClient::SearchClient(std::shared_ptr<SearchProvider> provider,
                           std::shared_ptr<SearchCache> cache, RetryPolicy retry, bool offline,
                           std::string provider_name)
    : provider_(std::move(provider)),
      cache_(std::move(cache)),
      retry_(retry),
      offline_(offline),
      provider_name_(provider_ ? provider_->name()
                               : (provider_name.empty() ? "none" : std::move(provider_name))) {}

CachedSearch SearchClient::search(const SearchQuery& query) {
  std::string key = cache_key(query, provider_name_);
  if (cache_) {
    if (auto hit = cache_->get(key)) return *hit;
  }
  if (offline_)
    throw std::runtime_error("offline mode: cache miss for claim " + query.claim_id +
                             " (key " + key + ")");
  if (!provider_) throw std::runtime_error("no search provider configured");

  std::exception_ptr last;
  for (int attempt = 0; attempt < retry_.attempts; ++attempt) {
    if (attempt > 0) {
      auto wait = std::chrono::duration<double>(retry_.initial_backoff_seconds * (1 << (attempt - 1)));
      std::this_thread::sleep_for(wait);
    }
    try {
      CachedSearch entry;
      entry.provider = provider_name_;
      entry.query_text = query.text;
      entry.max_results = query.max_results;
      entry.retrieved_at = now_iso8601();
      entry.results = provider_->fetch(query);
      if (cache_) cache_->put(key, entry);
      return entry;
    } catch (...) {
      last = std::current_exception();
    }
  }
  std::rethrow_exception(last);
}

std::vector<EvidenceBundle> retrieve_all(const std::vector<Claim>& claims, SearchClient& client,
                                         const FilterPolicy& policy, int max_results,
                                         int concurrency, FilterStats* totals) {
  std::vector<EvidenceBundle> bundles(claims.size());
  std::mutex stats_mutex;
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
      try {
        SearchQuery query = formulate_query(claims[i], max_results);
        CachedSearch entry = client.search(query);
        FilterStats local;
        EvidenceBundle b = filter_evidence(entry.results, claims[i], policy, &local);
        b.provider = entry.provider;
        b.retrieved_at = entry.retrieved_at;
        bundles[i] = std::move(b);
        if (totals) {
          std::lock_guard lock(stats_mutex);
          totals->kept += local.kept;
          totals->dropped_blocked_domain += local.dropped_blocked_domain;
          totals->dropped_post_dated += local.dropped_post_dated;
          totals->dropped_undated += local.dropped_undated;
          totals->undated_kept += local.undated_kept;
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  int n_threads = std::max(1, std::min<int>(concurrency, static_cast<int>(claims.size())));
  std::vector<std::thread> threads;
  for (int i = 0; i < n_threads; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return bundles;
}

void save_bundles(const std::vector<EvidenceBundle>& bundles, const std::string& path) {
  std::vector<json> records;
  records.reserve(bundles.size());
  for (const EvidenceBundle& b : bundles) records.push_back(bundle_to_json(b));
  write_jsonl(path, records);
}

std::vector<EvidenceBundle> load_bundles(const std::string& path) {
  std::vector<EvidenceBundle> out;
  for (const json& r : read_jsonl(path)) out.push_back(bundle_from_json(r));
  return out;
}

}  // namespace factcheck
