#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace factcheck {

/// Minimal TOML-subset reader covering what the config and template files
/// use: [section] headers, string/int/float/bool scalars, and arrays of
/// strings. Keys are addressed as "section.key".
class TomlTable {
 public:
  static TomlTable parse(const std::string& text, const std::string& source_name = "<toml>");
  static TomlTable parse_file(const std::string& path);

  bool has(const std::string& key) const;
  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<long> get_int(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;
  std::optional<std::vector<std::string>> get_string_array(const std::string& key) const;

  std::vector<std::string> keys() const;

 private:
  struct Value {
    enum class Kind { String, Int, Float, Bool, Array } kind;
    std::string str;
    long integer = 0;
    double real = 0.0;
    bool boolean = false;
    std::vector<std::string> array;
  };
  std::map<std::string, Value> values_;
};

}  // namespace factcheck
