#ifndef FDIA_CONFIG_HPP
#define FDIA_CONFIG_HPP

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fdia/common.hpp"

namespace fdia {

/// Flat key = value document (TOML subset: sections, lists, # comments).
/// Section headers prefix their keys: `[train]` + `lambda = 1` gives "train.lambda".
class ConfigDocument {
 public:
  ConfigDocument() = default;

  static ConfigDocument parse(std::istream& is) {
    ConfigDocument doc;
    std::vector<CLI::ConfigItem> items;
    try {
      items = CLI::ConfigTOML().from_config(is);
    } catch (const CLI::Error& e) {
      throw DataError(std::string("config: ") + e.what());
    }
    for (const auto& item : items) {
      if (item.name == "++" || item.name == "--") continue;  // section markers
      doc.values_[item.fullname()] = item.inputs;
    }
    return doc;
  }

  static ConfigDocument parse_string(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

  static ConfigDocument load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open config '" + path + "'");
    return parse(is);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  void set(const std::string& key, const std::string& value) { values_[key] = {value}; }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    used_.insert(key);
    if (it->second.size() != 1) throw DataError("config: '" + key + "' expects a single value");
    return convert<T>(key, it->second.front());
  }

  template <typename T>
  std::vector<T> get_list(const std::string& key, std::vector<T> fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    used_.insert(key);
    std::vector<T> out;
    for (const auto& s : it->second) out.push_back(convert<T>(key, s));
    return out;
  }

  /// Keys nobody asked for; typos show up here.
  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

  void require_all_used() const {
    const auto extra = unused_keys();
    if (extra.empty()) return;
    std::string msg = "config: unknown key";
    for (const auto& k : extra) msg += " '" + k + "'";
    throw DataError(msg);
  }

  const std::map<std::string, std::vector<std::string>>& values() const { return values_; }

 private:
  template <typename T>
  static T convert(const std::string& key, const std::string& raw) {
    std::string s = raw;
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
    if constexpr (std::is_same_v<T, std::string>) {
      return s;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (s == "true" || s == "1") return true;
      if (s == "false" || s == "0") return false;
      throw DataError("config: '" + key + "' expects true/false, got '" + raw + "'");
    } else {
      std::istringstream is(s);
      T v{};
      is >> v;
      if (!is || !(is >> std::ws).eof())
        throw DataError("config: '" + key + "' has invalid value '" + raw + "'");
      return v;
    }
  }

  std::map<std::string, std::vector<std::string>> values_;
  mutable std::set<std::string> used_;
};

}  // namespace fdia

#endif  // FDIA_CONFIG_HPP
