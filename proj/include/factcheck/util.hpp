#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace factcheck {

using json = nlohmann::ordered_json;

/// Lowercase ASCII copy.
std::string to_lower(std::string_view s);

/// Collapse runs of whitespace to single spaces and trim the ends.
std::string normalize_whitespace(std::string_view s);

/// Replace every occurrence of `needle` in `s` with `repl`.
std::string replace_all(std::string s, std::string_view needle, std::string_view repl);

/// SHA-256 of `data`, lowercase hex (64 chars).
std::string sha256_hex(std::string_view data);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

/// SHA-256 of a file's contents. Throws if unreadable.
std::string hash_file(const std::string& path);

/// Parse a record-per-line file; blank lines are skipped. Line numbers are
/// reported on parse failure.
std::vector<json> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<json>& records);

/// True when `s` looks like an ISO-8601 calendar date (YYYY-MM-DD).
bool is_iso_date(std::string_view s);

/// Extract a leading "Mon DD, YYYY" date from text, as ISO. Absent if the
/// text does not start with one.
std::optional<std::string> parse_leading_month_date(std::string_view text);

/// Current wall-clock time as an ISO-8601 UTC timestamp.
std::string now_iso8601();

/// Host of a URL, lowercased, with a leading "www." stripped.
/// Empty string when the URL has no recognizable host.
std::string domain_of_url(std::string_view url);

/// Suffix match against a domain blocklist: "news.snopes.com" matches
/// "snopes.com".
bool domain_matches(std::string_view domain, std::string_view blocked);

}  // namespace factcheck
