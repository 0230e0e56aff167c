#include "gite/config/key_value.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "gite/error.hpp"

namespace gite::config {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_integer(std::string_view text, const std::string& what) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(what + ": expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

KeyValue KeyValue::parse(std::string_view text, const std::string& source) {
  KeyValue kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string at = source + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) throw ConfigError(at + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError(at + ": empty key");
    kv.entries_[key] = std::string(trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValue KeyValue::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void KeyValue::set(const std::string& key, std::string value) { entries_[key] = std::move(value); }
void KeyValue::set(const std::string& key, double value) { entries_[key] = format_double(value); }
void KeyValue::set(const std::string& key, std::size_t value) {
  entries_[key] = std::to_string(value);
}
void KeyValue::set(const std::string& key, bool value) { entries_[key] = value ? "true" : "false"; }

void KeyValue::merge(const KeyValue& overrides) {
  for (const auto& [k, v] : overrides.entries_) entries_[k] = v;
}

std::string KeyValue::get(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double KeyValue::get_double(const std::string& key, double fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : parse_double(it->second, key);
}

std::size_t KeyValue::get_size(const std::string& key, std::size_t fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : parse_integer<std::size_t>(it->second, key);
}

std::uint64_t KeyValue::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : parse_integer<std::uint64_t>(it->second, key);
}

bool KeyValue::get_bool(const std::string& key, bool fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

void KeyValue::require_known(const std::vector<std::string>& known) const {
  for (const auto& [k, v] : entries_) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }
}

std::string KeyValue::serialize() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw ConfigError("format_double: conversion failed");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text, const std::string& what) {
  text = trim(text);
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(what + ": expected a number, got '" + std::string(text) + "'");
  }
  return value;
}

std::string format_hex(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::hex);
  if (ec != std::errc()) throw ConfigError("format_hex: conversion failed");
  return std::string(buf, ptr);
}

double parse_hex(std::string_view text, const std::string& what) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value, std::chars_format::hex);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(what + ": expected a hex float, got '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace gite::config
