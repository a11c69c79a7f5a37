#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "flowinv/errors.hpp"

namespace flowinv {

/// Plain-text configuration: `[section]` headers and `key = value` entries.
/// `#` starts a comment. Lookups report the full field path on error.
class ConfigFile {
 public:
  static ConfigFile parse_string(const std::string& text,
                                 const std::string& origin = "<string>") {
    ConfigFile cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string s = strip_comment(line);
      s = trim(s);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw ConfigError(origin + ":" + std::to_string(lineno) +
                            ": unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        if (section.empty())
          throw ConfigError(origin + ":" + std::to_string(lineno) +
                            ": empty section name");
        cfg.sections_[section];  // record even if empty
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": expected `key = value`, got: " + s);
      std::string key = trim(s.substr(0, eq));
      std::string value = trim(s.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      if (section.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": key `" + key + "` outside any [section]");
      cfg.sections_[section][key] = value;
      cfg.lines_[section + "." + key] = lineno;
    }
    return cfg;
  }

  static ConfigFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
  }

  bool has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
  }

  void set(const std::string& section, const std::string& key,
           const std::string& value) {
    sections_[section][key] = value;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return fallback;
    auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
  }

  std::string require_string(const std::string& section, const std::string& key) const {
    if (!has(section, key))
      throw ConfigError("config: missing required field " + section + "." + key);
    return sections_.at(section).at(key);
  }

  double get_double(const std::string& section, const std::string& key,
                    double fallback) const {
    if (!has(section, key)) return fallback;
    return parse_double(section, key, sections_.at(section).at(key));
  }

  long long get_int(const std::string& section, const std::string& key,
                    long long fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = sections_.at(section).at(key);
    try {
      std::size_t used = 0;
      long long out = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing");
      return out;
    } catch (const std::exception&) {
      throw ConfigError(field_path(section, key) + ": expected integer, got `" + v + "`");
    }
  }

  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const {
    if (!has(section, key)) return fallback;
    std::string v = sections_.at(section).at(key);
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(field_path(section, key) + ": expected boolean, got `" + v + "`");
  }

  std::vector<std::string> get_string_list(const std::string& section,
                                           const std::string& key,
                                           std::vector<std::string> fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<std::string> out;
    std::istringstream in(sections_.at(section).at(key));
    std::string item;
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  std::vector<double> get_double_list(const std::string& section,
                                      const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : get_string_list(section, key, {}))
      out.push_back(parse_double(section, key, item));
    return out;
  }

  /// Rejects keys outside the allowed schema, naming the offending field.
  void validate_known(const std::map<std::string, std::set<std::string>>& schema) const {
    for (const auto& [section, entries] : sections_) {
      auto it = schema.find(section);
      if (it == schema.end())
        throw ConfigError("config: unknown section [" + section + "]");
      for (const auto& [key, value] : entries)
        if (it->second.count(key) == 0)
          throw ConfigError("config: unknown field " + field_path(section, key));
    }
  }

  /// Fully resolved, sorted `key = value` rendering (stable across runs).
  std::string canonical() const {
    std::ostringstream os;
    for (const auto& [section, entries] : sections_) {
      os << "[" << section << "]\n";
      for (const auto& [key, value] : entries) os << key << " = " << value << "\n";
      os << "\n";
    }
    return os.str();
  }

  std::string field_path(const std::string& section, const std::string& key) const {
    std::string path = section + "." + key;
    auto l = lines_.find(path);
    if (l != lines_.end())
      return origin_ + ":" + std::to_string(l->second) + ": " + path;
    return path;
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static std::string strip_comment(const std::string& s) {
    auto pos = s.find('#');
    return pos == std::string::npos ? s : s.substr(0, pos);
  }

  double parse_double(const std::string& section, const std::string& key,
                      const std::string& v) const {
    try {
      std::size_t used = 0;
      double out = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing");
      return out;
    } catch (const std::exception&) {
      throw ConfigError(field_path(section, key) + ": expected number, got `" + v + "`");
    }
  }

  std::string origin_;
  std::map<std::string, std::map<std::string, std::string>> sections_;
  std::map<std::string, int> lines_;
};

}  // namespace flowinv
