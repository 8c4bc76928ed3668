#pragma once

// Flat key=value configuration files with dotted keys, e.g.
//
//   # comment
//   train.lr = 0.015
//   model.n = 100

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace nemon {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value);
  void erase(const std::string& key) { values_.erase(key); }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list of reals.
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  /// Comma-separated list of words.
  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  /// Sorted "key=value\n" lines, skipping keys in `exclude`.
  std::string canonical(const std::vector<std::string>& exclude = {}) const;

 private:
  std::map<std::string, std::string> values_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& data);

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t v);

}  // namespace nemon
