#include "factcheck/toml.hpp"

#include <cctype>
#include <sstream>
#include <stdexcept>

#include "factcheck/util.hpp"

namespace factcheck {

namespace {

[[noreturn]] void fail(const std::string& source, std::size_t lineno, const std::string& message) {
  throw std::runtime_error(source + ":" + std::to_string(lineno) + ": " + message);
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (c == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

std::string parse_quoted(const std::string& raw, const std::string& source, std::size_t lineno,
                         std::size_t& pos) {
  // raw[pos] == '"'
  std::string out;
  for (std::size_t i = pos + 1; i < raw.size(); ++i) {
    char c = raw[i];
    if (c == '\\') {
      if (i + 1 >= raw.size()) fail(source, lineno, "dangling escape");
      char e = raw[++i];
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default: fail(source, lineno, std::string("unknown escape \\") + e);
      }
    } else if (c == '"') {
      pos = i + 1;
      return out;
    } else {
      out.push_back(c);
    }
  }
  fail(source, lineno, "unterminated string");
}

}  // namespace

TomlTable TomlTable::parse(const std::string& text, const std::string& source_name) {
  TomlTable table;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string trimmed = normalize_whitespace(strip_comment(line));
    if (trimmed.empty()) continue;
    if (trimmed.front() == '[') {
      if (trimmed.back() != ']') fail(source_name, lineno, "malformed section header");
      section = normalize_whitespace(trimmed.substr(1, trimmed.size() - 2));
      if (section.empty()) fail(source_name, lineno, "empty section name");
      continue;
    }
    std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos) fail(source_name, lineno, "expected key = value");
    std::string key = normalize_whitespace(trimmed.substr(0, eq));
    std::string raw = normalize_whitespace(trimmed.substr(eq + 1));
    if (key.empty()) fail(source_name, lineno, "empty key");
    if (raw.empty()) fail(source_name, lineno, "missing value for key " + key);
    std::string full_key = section.empty() ? key : section + "." + key;

    Value v{};
    if (raw.front() == '"') {
      std::size_t pos = 0;
      v.kind = Value::Kind::String;
      v.str = parse_quoted(raw, source_name, lineno, pos);
      if (pos != raw.size()) fail(source_name, lineno, "trailing content after string");
    } else if (raw.front() == '[') {
      if (raw.back() != ']') fail(source_name, lineno, "unterminated array");
      v.kind = Value::Kind::Array;
      std::size_t pos = 1;
      while (pos < raw.size() - 1) {
        while (pos < raw.size() - 1 && (raw[pos] == ' ' || raw[pos] == ',')) ++pos;
        if (pos >= raw.size() - 1) break;
        if (raw[pos] == '"') {
          v.array.push_back(parse_quoted(raw, source_name, lineno, pos));
        } else {
          std::size_t end = raw.find_first_of(",]", pos);
          v.array.push_back(normalize_whitespace(raw.substr(pos, end - pos)));
          pos = end;
        }
      }
    } else if (raw == "true" || raw == "false") {
      v.kind = Value::Kind::Bool;
      v.boolean = raw == "true";
    } else {
      bool is_float = raw.find_first_of(".eE") != std::string::npos &&
                      raw.find_first_not_of("+-0123456789.eE") == std::string::npos;
      try {
        std::size_t consumed = 0;
        if (is_float) {
          v.kind = Value::Kind::Float;
          v.real = std::stod(raw, &consumed);
        } else {
          v.kind = Value::Kind::Int;
          v.integer = std::stol(raw, &consumed);
        }
        if (consumed != raw.size()) throw std::invalid_argument(raw);
      } catch (const std::exception&) {
        fail(source_name, lineno, "cannot parse value \"" + raw + "\" for key " + key);
      }
    }
    table.values_[full_key] = std::move(v);
  }
  return table;
}

TomlTable TomlTable::parse_file(const std::string& path) {
  return parse(read_file(path), path);
}

bool TomlTable::has(const std::string& key) const { return values_.count(key) > 0; }

std::optional<std::string> TomlTable::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.kind != Value::Kind::String) return std::nullopt;
  return it->second.str;
}

std::optional<long> TomlTable::get_int(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.kind != Value::Kind::Int) return std::nullopt;
  return it->second.integer;
}

std::optional<double> TomlTable::get_double(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (it->second.kind == Value::Kind::Float) return it->second.real;
  if (it->second.kind == Value::Kind::Int) return static_cast<double>(it->second.integer);
  return std::nullopt;
}

std::optional<bool> TomlTable::get_bool(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.kind != Value::Kind::Bool) return std::nullopt;
  return it->second.boolean;
}

std::optional<std::vector<std::string>> TomlTable::get_string_array(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.kind != Value::Kind::Array) return std::nullopt;
  return it->second.array;
}

std::vector<std::string> TomlTable::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

}  // namespace factcheck
