#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace adfilt::runner {

/// Flat key=value configuration with dotted section names
/// (e.g. evasion.alpha0=100). File values are overridden by set() calls
/// (command-line flags). Lines starting with '#' are comments.
class Config {
public:
  Config() = default;
  static Config from_file(const std::filesystem::path& path);
  static Config from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string get_str(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback) const;
  std::vector<std::string> get_strs(const std::string& key,
                                    const std::vector<std::string>& fallback) const;

  /// Sorted key=value lines; what --print-config echoes and what the
  /// config hash covers.
  std::string resolved() const;
  /// FNV-1a of resolved(), 16 hex digits.
  std::string hash() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

private:
  std::map<std::string, std::string> entries_;
};

}  // namespace adfilt::runner
