#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lwir {

/// `key = value` text with `#` comments. Keys may repeat; order is kept.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::string& path);

  bool has(std::string_view key) const;
  /// Last value for `key`; throws ConfigError when absent.
  const std::string& get(std::string_view key) const;
  std::vector<std::string> get_all(std::string_view key) const;

  std::string get_or(std::string_view key, std::string fallback) const;
  double get_double(std::string_view key) const;
  double get_double_or(std::string_view key, double fallback) const;
  std::int64_t get_int(std::string_view key) const;
  std::int64_t get_int_or(std::string_view key, std::int64_t fallback) const;
  bool get_bool_or(std::string_view key, bool fallback) const;
  /// Comma-separated list of numbers.
  std::vector<double> get_doubles(std::string_view key) const;

  void set(std::string key, std::string value);
  void add(std::string key, std::string value);

  /// Throws ConfigError naming the first key not in `allowed`. Keys with a
  /// prefix listed in `allowed_prefixes` are accepted as well.
  void require_known(const std::set<std::string>& allowed,
                     const std::vector<std::string>& allowed_prefixes = {}) const;

  /// Entries whose key starts with `prefix`, with the prefix stripped.
  KeyValueConfig with_prefix(std::string_view prefix) const;

  std::string to_text() const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

double parse_double(std::string_view text, std::string_view what);
std::int64_t parse_int(std::string_view text, std::string_view what);
std::vector<double> parse_double_list(std::string_view text, std::string_view what);

/// Shortest text that reads back to exactly `v`.
std::string format_double(double v);

}  // namespace lwir
