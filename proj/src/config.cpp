#include "ztwin/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ztwin/errors.hpp"

namespace ztwin {

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  const auto begin = s.find_first_not_of(ws);
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(ws);
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  parts.push_back(current);
  return parts;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_string(text.str());
}

ConfigFile ConfigFile::parse_string(const std::string& text) {
  ConfigFile cfg;
  std::string section;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    cfg.entries_.push_back({section, key, value});
    cfg.by_path_[section + "." + key] = value;
  }
  return cfg;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  return by_path_.count(section + "." + key) > 0;
}

std::string ConfigFile::get(const std::string& section, const std::string& key) const {
  const auto it = by_path_.find(section + "." + key);
  if (it == by_path_.end())
    throw ConfigError("missing config key: [" + section + "] " + key);
  return it->second;
}

std::string ConfigFile::get_or(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
  const auto it = by_path_.find(section + "." + key);
  return it == by_path_.end() ? fallback : it->second;
}

namespace {

double to_double(const std::string& section, const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || trim(end).size() > 0)
    throw ConfigError("config key [" + section + "] " + key + ": not a number: " + value);
  return v;
}

}  // namespace

double ConfigFile::get_double(const std::string& section, const std::string& key) const {
  return to_double(section, key, get(section, key));
}

double ConfigFile::get_double_or(const std::string& section, const std::string& key,
                                 double fallback) const {
  if (!has(section, key)) return fallback;
  return get_double(section, key);
}

long long ConfigFile::get_int(const std::string& section, const std::string& key) const {
  const std::string value = get(section, key);
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (end == value.c_str() || trim(end).size() > 0)
    throw ConfigError("config key [" + section + "] " + key + ": not an integer: " + value);
  return v;
}

long long ConfigFile::get_int_or(const std::string& section, const std::string& key,
                                 long long fallback) const {
  if (!has(section, key)) return fallback;
  return get_int(section, key);
}

bool ConfigFile::get_bool_or(const std::string& section, const std::string& key,
                             bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key [" + section + "] " + key + ": not a boolean: " + v);
}

std::vector<std::string> ConfigFile::get_list_or(const std::string& section, const std::string& key,
                                                 const std::vector<std::string>& fallback) const {
  if (!has(section, key)) return fallback;
  std::vector<std::string> items;
  for (const auto& part : split(get(section, key), ',')) {
    const std::string item = trim(part);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::vector<double> ConfigFile::get_doubles_or(const std::string& section, const std::string& key,
                                               const std::vector<double>& fallback) const {
  if (!has(section, key)) return fallback;
  std::vector<double> values;
  for (const auto& item : get_list_or(section, key, {}))
    values.push_back(to_double(section, key, item));
  return values;
}

std::vector<std::pair<std::string, std::string>> ConfigFile::section_items(
    const std::string& section) const {
  std::vector<std::pair<std::string, std::string>> items;
  for (const auto& e : entries_)
    if (e.section == section) items.emplace_back(e.key, e.value);
  return items;
}

bool ConfigFile::has_section(const std::string& section) const {
  for (const auto& e : entries_)
    if (e.section == section) return true;
  return false;
}

}  // namespace ztwin
