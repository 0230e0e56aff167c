#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gite::config {

/// Flat `key = value` configuration. `#` starts a comment. Keys are kept
/// sorted so serialization is deterministic.
class KeyValue {
 public:
  static KeyValue parse(std::string_view text, const std::string& source = "<config>");
  static KeyValue read(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::size_t value);
  void set(const std::string& key, bool value);
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }
  void merge(const KeyValue& overrides);

  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Throws ConfigError naming the first key not in `known`.
  void require_known(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  std::string serialize() const;

 private:
  std::map<std::string, std::string> entries_;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text, const std::string& what);
/// Exact hexadecimal text of a double.
std::string format_hex(double value);
double parse_hex(std::string_view text, const std::string& what);

}  // namespace gite::config
