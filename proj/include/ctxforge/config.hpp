#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ctxforge {

/// Fatal configuration problem (bad key, missing credential, unreadable file).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat key/value configuration read from a TOML-style file.
///
/// Supports `[section]` headers (keys below become `section.key`), dotted
/// keys, `#` comments, and string / integer / float / boolean scalars.
class Config {
 public:
  static Config parse(std::string_view text);
  static Config from_file(const std::string& path);

  [[nodiscard]] std::optional<std::string> get(std::string_view key) const;
  [[nodiscard]] std::string get_string(std::string_view key, std::string_view fallback) const;
  [[nodiscard]] long long get_int(std::string_view key, long long fallback) const;
  [[nodiscard]] double get_double(std::string_view key, double fallback) const;
  [[nodiscard]] bool get_bool(std::string_view key, bool fallback) const;
  [[nodiscard]] std::optional<double> get_optional_double(std::string_view key) const;
  [[nodiscard]] std::vector<long long> get_int_list(std::string_view key, std::vector<long long> fallback) const;
  [[nodiscard]] bool contains(std::string_view key) const { return get(key).has_value(); }

  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
  [[nodiscard]] const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace ctxforge
