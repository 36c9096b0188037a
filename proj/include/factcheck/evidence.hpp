#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "factcheck/corpus.hpp"
#include "factcheck/util.hpp"

namespace factcheck {

struct SearchQuery {
  std::string text;
  int max_results = 10;
  std::string claim_id;
};

struct RawSearchResult {
  std::string title;
  std::string snippet;
  std::string url;
  std::string source_domain;  // lowercase registrable domain from url
  std::optional<std::string> publish_date;  // ISO-8601 date
  int rank = 1;

  friend bool operator==(const RawSearchResult&, const RawSearchResult&) = default;
};

struct FilterPolicy {
  std::set<std::string> blocked_domains;
  bool enforce_date_ceiling = true;
  bool drop_undated = false;

  /// Ships with known fact-checking sites blocked.
  static FilterPolicy defaults();
};

struct EvidenceBundle {
  std::string claim_id;
  std::vector<RawSearchResult> snippets;  // post-filter, ranks strictly increasing
  std::string retrieved_at;
  std::string provider;
};

/// Drop counts from one filter_evidence call, for the run report.
struct FilterStats {
  std::size_t kept = 0;
  std::size_t dropped_blocked_domain = 0;
  std::size_t dropped_post_dated = 0;
  std::size_t dropped_undated = 0;
  std::size_t undated_kept = 0;
};

/// Query text is the claim text, whitespace-normalized and truncated to the
/// provider cap on a word boundary.
SearchQuery formulate_query(const Claim& claim, int max_results, std::size_t query_char_cap = 512);

/// Stable content hash of (provider, normalized query text, max_results).
std::string cache_key(const SearchQuery& query, const std::string& provider_name);

EvidenceBundle filter_evidence(const std::vector<RawSearchResult>& results, const Claim& claim,
                               const FilterPolicy& policy, FilterStats* stats = nullptr);

/// Publish-date cascade: provider metadata first, then a leading
/// "Mon DD, YYYY" in the snippet, else absent.
std::optional<std::string> extract_publish_date(const std::optional<std::string>& metadata_date,
                                                const std::string& snippet);

json search_result_to_json(const RawSearchResult& r);
RawSearchResult search_result_from_json(const json& r);
json bundle_to_json(const EvidenceBundle& b);
EvidenceBundle bundle_from_json(const json& b);

// ---------------------------------------------------------------------------
// Provider clients

class SearchProvider {
 public:
  virtual ~SearchProvider() = default;
  virtual std::string name() const = 0;
  /// One provider round trip. Throws on transport or protocol failure.
  virtual std::vector<RawSearchResult> fetch(const SearchQuery& query) = 0;
};

struct HttpProviderConfig {
  std::string base_url = "https://www.googleapis.com";
  std::string path = "/customsearch/v1";
  std::string api_key;    // from environment, never logged or cached
  std::string engine_id;  // cx parameter
  int timeout_seconds = 20;
};

/// Google Programmable Search compatible client: GET with {q, num, key, cx},
/// response {items: [{title, link, snippet, pagemap.metatags}]}.
class HttpSearchProvider : public SearchProvider {
 public:
  explicit HttpSearchProvider(HttpProviderConfig config);
  std::string name() const override { return "google"; }
  std::vector<RawSearchResult> fetch(const SearchQuery& query) override;

  /// Parse a provider response body into normalized results. Exposed for
  /// fixture-driven tests.
  static std::vector<RawSearchResult> parse_response(const std::string& body, int max_results);

 private:
  HttpProviderConfig config_;
};

/// Canned provider reading a JSON file {claim_id or query text -> items[]}
/// in the provider wire shape. Used for offline runs and tests.
class FixtureSearchProvider : public SearchProvider {
 public:
  explicit FixtureSearchProvider(const std::string& fixture_path);
  std::string name() const override { return "fixture"; }
  std::vector<RawSearchResult> fetch(const SearchQuery& query) override;

 private:
  json fixture_;
};

// ---------------------------------------------------------------------------
// Cache

struct CachedSearch {
  std::string provider;
  std::string query_text;
  int max_results = 0;
  std::string retrieved_at;
  std::vector<RawSearchResult> results;
};

/// One file per cache key under a directory. Concurrent readers are fine;
/// writers serialize per key.
class SearchCache {
 public:
  explicit SearchCache(std::string dir);
  std::optional<CachedSearch> get(const std::string& key) const;
  void put(const std::string& key, const CachedSearch& entry);
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  mutable std::mutex mutex_;
};

struct RetryPolicy {
  int attempts = 3;
  double initial_backoff_seconds = 1.0;
};

/// Cache-through search client. A warm cache hit performs zero network calls.
class SearchClient {
 public:
  /// `provider_name` overrides the cache-key namespace when no live provider
  /// is attached (offline cache-only mode), so warm-cache keys still line up.
  SearchClient(std::shared_ptr<SearchProvider> provider, std::shared_ptr<SearchCache> cache,
               RetryPolicy retry = {}, bool offline = false, std::string provider_name = {});

  /// Results plus the retrieval timestamp (from cache when warm, so repeated
  /// runs are byte-reproducible).
  CachedSearch search(const SearchQuery& query);

  const std::string& provider_name() const { return provider_name_; }

 private:
  std::shared_ptr<SearchProvider> provider_;
  std::shared_ptr<SearchCache> cache_;
  RetryPolicy retry_;
  bool offline_;
  std::string provider_name_;
};

/// Retrieve evidence for many claims with up to `concurrency` in-flight
/// searches; output order always matches claim order.
std::vector<EvidenceBundle> retrieve_all(const std::vector<Claim>& claims, SearchClient& client,
                                         const FilterPolicy& policy, int max_results,
                                         int concurrency, FilterStats* totals = nullptr);

void save_bundles(const std::vector<EvidenceBundle>& bundles, const std::string& path);
std::vector<EvidenceBundle> load_bundles(const std::string& path);

}  // namespace factcheck
