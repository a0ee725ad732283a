// Copyright 2026 The gpcinfer authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gpcinfer/common.hpp>
#include <gpcinfer/csv.hpp>

namespace gpcinfer {

/// Plain-text run configuration: `[section]` lines group `key = value` pairs,
/// `#` starts a comment. Keys are addressed as "section.key".
///
/// Every getter records the effective value (user-provided or default), so
/// snapshot() reproduces the full configuration a run actually used. Keys
/// that were provided but never consumed are unknown; finalize() rejects them.
class Config {
 public:
  Config() = default;

  static Config parse_string(const std::string& text, const std::string& origin = "<string>") {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string s = strip(line);
      const auto hash = s.find('#');
      if (hash != std::string::npos) s = strip(s.substr(0, hash));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated section header");
        section = strip(s.substr(1, s.size() - 2));
        if (section.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = strip(s.substr(0, eq));
      const std::string value = strip(s.substr(eq + 1));
      if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      const std::string full = section.empty() ? key : section + "." + key;
      if (cfg.values_.count(full)) throw ConfigError(origin + ": duplicate key '" + full + "'");
      cfg.values_[full] = value;
    }
    return cfg;
  }

  static Config parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path.string());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    const std::string v = it == values_.end() ? fallback : it->second;
    consumed_.insert(key);
    effective_[key] = v;
    return v;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    consumed_.insert(key);
    if (it == values_.end()) {
      effective_[key] = num(fallback);
      return fallback;
    }
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(it->second);
      effective_[key] = num(v);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' is not a number: '" + it->second + "'");
    }
  }

  long get_int(const std::string& key, long fallback) const {
    const double v = get_double(key, static_cast<double>(fallback));
    const long r = static_cast<long>(v);
    if (static_cast<double>(r) != v) throw ConfigError("config: key '" + key + "' is not an integer");
    return r;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const std::string v = get_string(key, fallback ? "true" : "false");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: key '" + key + "' is not a boolean: '" + v + "'");
  }

  /// Space-free comma list of doubles, e.g. "0.05,0.10,0.15".
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const {
    std::string def;
    for (std::size_t i = 0; i < fallback.size(); ++i) def += (i ? "," : "") + num(fallback[i]);
    const std::string v = get_string(key, def);
    std::vector<double> out;
    if (strip(v).empty()) return out;
    for (const auto& cell : split_csv_line(v)) {
      try {
        out.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' has non-numeric entry '" + cell + "'");
      }
    }
    return out;
  }

  /// Rejects keys that were provided by the user but never consumed by any
  /// getter. Call once after the full scenario has been assembled.
  void finalize() const {
    std::vector<std::string> unknown;
    for (const auto& [k, v] : values_)
      if (!consumed_.count(k)) unknown.push_back(k);
    if (!unknown.empty()) {
      std::string msg = "config: unknown key(s):";
      for (const auto& k : unknown) msg += " '" + k + "'";
      throw ConfigError(msg);
    }
  }

  /// Serializes every effective key (defaults included) grouped by section.
  std::string snapshot() const {
    std::map<std::string, std::map<std::string, std::string>> by_section;
    for (const auto& [full, v] : effective_) {
      const auto dot = full.find('.');
      const std::string section = dot == std::string::npos ? "" : full.substr(0, dot);
      const std::string key = dot == std::string::npos ? full : full.substr(dot + 1);
      by_section[section][key] = v;
    }
    std::string out;
    for (const auto& [section, kv] : by_section) {
      if (!section.empty()) out += "[" + section + "]\n";
      for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
      out += "\n";
    }
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
  mutable std::map<std::string, std::string> effective_;
};

}  // namespace gpcinfer
