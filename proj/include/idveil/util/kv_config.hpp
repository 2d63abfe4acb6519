#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "idveil/core/errors.hpp"

namespace idveil {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Flat key = value configuration. One pair per line, '#' starts a comment,
// whitespace around keys and values is trimmed, later assignments win.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse_string(const std::string& text, const std::string& origin = "<string>") {
    KvConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      }
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty()) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      }
      cfg.entries_[key] = value;
    }
    return cfg;
  }

  static KvConfig parse_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_string(buf.str(), path.string());
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::string get(const std::string& key, const std::string& fallback = "") const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
  }

  std::string require(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("missing required config key: " + key);
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    return parse_double(key, entries_.at(key));
  }

  long long get_int(const std::string& key, long long fallback) const {
    if (!has(key)) return fallback;
    return parse_int(key, entries_.at(key));
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = entries_.at(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key " + key + ": expected a boolean, got '" + v + "'");
  }

  // Comma separated integer list.
  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback = {}) const {
    if (!has(key)) return fallback;
    std::vector<int> out;
    std::istringstream is(entries_.at(key));
    std::string tok;
    while (std::getline(is, tok, ',')) {
      tok = detail::trim(tok);
      if (tok.empty()) continue;
      out.push_back(static_cast<int>(parse_int(key, tok)));
    }
    return out;
  }

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }

  // Merge `other` on top of this config.
  void override_with(const KvConfig& other) {
    for (const auto& [k, v] : other.entries_) entries_[k] = v;
  }

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  double parse_double(const std::string& key, const std::string& v) const {
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": expected a number, got '" + v + "'");
    }
  }

  long long parse_int(const std::string& key, const std::string& v) const {
    try {
      std::size_t pos = 0;
      const long long n = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": expected an integer, got '" + v + "'");
    }
  }

  std::map<std::string, std::string> entries_;
};

}  // namespace idveil
