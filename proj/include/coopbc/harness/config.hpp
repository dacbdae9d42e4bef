#pragma once

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "coopbc/common.hpp"

namespace coopbc::harness {

// Flat `key = value` configuration with [section] headers, '#' comments, and
// blank lines. Keys are addressed as "section.key"; keys before any header
// live in the "" section. Every key must be consumed by the reader (typo
// protection): unread keys fail validation.
class KeyValueConfig {
 public:
  static KeyValueConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str(), path);
  }

  static KeyValueConfig from_string(const std::string& text, const std::string& origin = "<string>") {
    KeyValueConfig cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      if (trimmed.front() == '[') {
        if (trimmed.back() != ']')
          throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
        section = trim(trimmed.substr(1, trimmed.size() - 2));
        if (section.empty())
          throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
        continue;
      }
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      const std::string full = section.empty() ? key : section + "." + key;
      if (cfg.values_.count(full))
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + full + "'");
      cfg.values_[full] = value;
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_.push_back(key);
    return it->second;
  }

  std::string require_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(origin_ + ": missing required key '" + key + "'");
    consumed_.push_back(key);
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_.push_back(key);
    return parse_double(it->second, key);
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_.push_back(key);
    return parse_int(it->second, key);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_.push_back(key);
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError(origin_ + ": key '" + key + "' must be true/false");
  }

  std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_.push_back(key);
    std::vector<double> out;
    std::istringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string t = trim(item);
      if (t.empty()) throw ConfigError(origin_ + ": empty element in list '" + key + "'");
      out.push_back(parse_double(t, key));
    }
    if (out.empty()) throw ConfigError(origin_ + ": empty list for '" + key + "'");
    return out;
  }

  // Call once all readers ran: any key never consumed is a typo.
  void reject_unknown_keys() const {
    for (const auto& [key, value] : values_)
      if (std::find(consumed_.begin(), consumed_.end(), key) == consumed_.end())
        throw ConfigError(origin_ + ": unknown key '" + key + "'");
  }

 private:
  static std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  }

  double parse_double(const std::string& s, const std::string& key) const {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": key '" + key + "' is not a number: '" + s + "'");
    }
  }

  std::int64_t parse_int(const std::string& s, const std::string& key) const {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": key '" + key + "' is not an integer: '" + s + "'");
    }
  }

  std::string origin_;
  std::map<std::string, std::string> values_;
  mutable std::vector<std::string> consumed_;
};

// Resolves an output path under the COOPMETA_OUT root when the variable is set
// and the path is relative.
inline std::string resolve_output_path(const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  const char* root = std::getenv("COOPMETA_OUT");
  if (!root || !*root) return path;
  std::string r(root);
  if (r.back() != '/') r += '/';
  return r + path;
}

}  // namespace coopbc::harness
