#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ztwin {

// Plain-text key/value configuration with [section] headers.
//
//   # comment
//   [run]
//   gnbs = 5
//   policy = ucb
//
// Keys are addressed as "section.key"; keys before any section header live in
// the "" section. Later assignments override earlier ones.
class ConfigFile {
 public:
  ConfigFile() = default;

  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;

  std::string get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;

  double get_double(const std::string& section, const std::string& key) const;
  double get_double_or(const std::string& section, const std::string& key, double fallback) const;
  long long get_int(const std::string& section, const std::string& key) const;
  long long get_int_or(const std::string& section, const std::string& key,
                       long long fallback) const;
  bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;

  // Comma-separated list values.
  std::vector<std::string> get_list_or(const std::string& section, const std::string& key,
                                       const std::vector<std::string>& fallback) const;
  std::vector<double> get_doubles_or(const std::string& section, const std::string& key,
                                     const std::vector<double>& fallback) const;

  // All key/value pairs of one section, in file order.
  std::vector<std::pair<std::string, std::string>> section_items(const std::string& section) const;

  bool has_section(const std::string& section) const;

 private:
  struct Entry {
    std::string section;
    std::string key;
    std::string value;
  };

  std::vector<Entry> entries_;                    // file order
  std::map<std::string, std::string> by_path_;    // "section.key" -> value (last wins)
};

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

}  // namespace ztwin
