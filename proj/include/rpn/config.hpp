#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rpn/errors.hpp"

namespace rpn {

// Flat key=value store with dotted keys ("rpn.epsilon=0.3"). '#' starts a
// comment, blank lines are skipped. Later assignments win, which is how CLI
// overrides layer on top of a file.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig from_file(const std::filesystem::path& path);
  static KeyValueConfig from_lines(const std::vector<std::string>& lines);

  // Parses one "key=value" assignment (CLI override syntax).
  void set_assignment(std::string_view assignment);
  void set(std::string key, std::string value);

  bool has(const std::string& key) const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

  // Typed getters; the key is recorded as consumed so unknown keys can be
  // rejected afterwards. All throw ConfigError on malformed values.
  std::string get_string(const std::string& key, std::string default_value) const;
  std::string require_string(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t default_value) const;
  std::uint64_t require_u64(const std::string& key) const;
  double get_double(const std::string& key, double default_value) const;
  bool get_bool(const std::string& key, bool default_value) const;
  std::vector<double> get_double_list(const std::string& key,
                                      std::vector<double> default_value) const;
  std::vector<std::int64_t> get_int_list(const std::string& key,
                                         std::vector<std::int64_t> default_value) const;

  // Throws ConfigError if any present key was never consumed by a getter.
  void reject_unknown_keys() const;

  // Canonical "key=value" lines, sorted by key: the resolved-config echo.
  std::vector<std::string> render() const;

 private:
  const std::string* find(const std::string& key) const;

  std::map<std::string, std::string> entries_;
  mutable std::set<std::string> consumed_;
};

// Shortest-round-trip decimal formatting for doubles (0.3 prints as "0.3").
std::string format_double(double value);

double parse_double(std::string_view text, const std::string& context);
std::int64_t parse_int(std::string_view text, const std::string& context);
bool parse_bool(std::string_view text, const std::string& context);

}  // namespace rpn
