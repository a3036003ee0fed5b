#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stylemapper {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// `key = value` lines; blank lines and `#` comments ignored. Every key must be consumed
// by some reader before check_all_used() or it is reported as unknown.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text) {
    KeyValueConfig c;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      const auto key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      c.set(key, trim(line.substr(eq + 1)));
    }
    return c;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) order_.push_back(key);
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  template <typename T>
  void read(const std::string& key, T& out) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return;
    used_.insert(key);
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        out = it->second;
      } else if constexpr (std::is_same_v<T, bool>) {
        if (it->second == "true" || it->second == "1") out = true;
        else if (it->second == "false" || it->second == "0") out = false;
        else throw std::invalid_argument("not a boolean");
      } else if constexpr (std::is_floating_point_v<T>) {
        out = static_cast<T>(std::stod(it->second));
      } else {
        if (!it->second.empty() && it->second[0] == '-') throw std::invalid_argument("negative");
        out = static_cast<T>(std::stoull(it->second));
      }
    } catch (const std::logic_error&) {
      throw ConfigError("config key '" + key + "': invalid value '" + it->second + "'");
    }
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::string raw;
    read(key, raw);
    std::istringstream in(raw);
    std::string item;
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  void check_all_used() const {
    for (const auto& k : order_) {
      if (!used_.count(k)) throw ConfigError("unknown config key '" + k + "'");
    }
  }

  // Canonical text form (insertion order), used for hashing run directories.
  std::string to_string() const {
    std::ostringstream os;
    for (const auto& k : order_) os << k << " = " << values_.at(k) << "\n";
    return os.str();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
  mutable std::set<std::string> used_;
};

}  // namespace stylemapper
