#ifndef TPA_CONFIG_HPP
#define TPA_CONFIG_HPP

// Flat UTF-8 `key=value` files with dotted section prefixes, e.g.
//
//   # attack settings, pixel units
//   attack.epsilon = 16
//   attack.tpa.lambda = 5
//
// Blank lines and lines starting with '#' are ignored. Keys are unique.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "tpa/data.hpp"
#include "tpa/error.hpp"

namespace tpa {

class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in, const std::string& source = "<config>") {
    KeyValueConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key=value");
      }
      const std::string key = trim(t.substr(0, eq));
      if (key.empty()) throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
      if (cfg.values_.contains(key)) {
        throw ConfigError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
      }
      cfg.values_[key] = {trim(t.substr(eq + 1)), line_no};
    }
    cfg.source_ = source;
    return cfg;
  }

  static KeyValueConfig parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    return parse(in, path.string());
  }

  bool contains(const std::string& key) const { return values_.contains(key); }

  /// Sets or overrides a key (command-line flags win over the file).
  void set(const std::string& key, std::string value) { values_[key] = {std::move(value), 0}; }

  std::optional<std::string> get(const std::string& key) const {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second.value;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const { return get(key).value_or(fallback); }

  double get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || ptr != v->data() + v->size()) throw bad_value(key, "a number");
    return out;
  }

  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || ptr != v->data() + v->size()) throw bad_value(key, "a nonnegative integer");
    return out;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    throw bad_value(key, "true or false");
  }

  /// Keys present in the file that no get() has asked for.
  std::set<std::string> unused_keys() const {
    std::set<std::string> out;
    for (const auto& [k, v] : values_)
      if (!used_.contains(k)) out.insert(k);
    return out;
  }

  /// Canonical text: sorted keys, one `key=value` per line.
  std::string to_string() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v.value + "\n";
    return out;
  }

  const std::string& source() const noexcept { return source_; }

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };

  static std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
  }

  ConfigError bad_value(const std::string& key, const char* expected) const {
    const auto it = values_.find(key);
    std::string where = source_;
    if (it != values_.end() && it->second.line) where += ":" + std::to_string(it->second.line);
    return ConfigError(where + ": key '" + key + "' must be " + expected + ", got '" +
                       (it != values_.end() ? it->second.value : std::string()) + "'");
  }

  std::map<std::string, Entry> values_;
  mutable std::set<std::string> used_;
  std::string source_ = "<config>";
};

}  // namespace tpa

#endif  // TPA_CONFIG_HPP
