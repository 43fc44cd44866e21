#include "ikh/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ikh/error.hpp"

namespace ikh {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    auto key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw Error(ErrorCode::ConfigError, origin + ":" + std::to_string(lineno) + ": empty key");
    }
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::ConfigError, "cannot read config " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  return parse(buf.str(), path.string());
}

std::string KeyValueConfig::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::ConfigError, origin_ + ": missing key '" + key + "'");
  return it->second;
}

namespace {

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigError, what + ": not a number: '" + text + "'");
  }
}

}  // namespace

double KeyValueConfig::get_double(const std::string& key) const {
  return parse_double(get_string(key), origin_ + ": " + key);
}

long long KeyValueConfig::get_int(const std::string& key) const {
  const double v = get_double(key);
  const auto i = static_cast<long long>(v);
  if (static_cast<double>(i) != v) {
    throw Error(ErrorCode::ConfigError, origin_ + ": " + key + " must be an integer");
  }
  return i;
}

bool KeyValueConfig::get_bool(const std::string& key) const {
  const auto v = get_string(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::ConfigError, origin_ + ": " + key + " must be a boolean");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split(get_string(key), ',')) {
    if (!item.empty()) out.push_back(parse_double(item, origin_ + ": " + key));
  }
  return out;
}

std::optional<double> KeyValueConfig::find_double(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return get_double(key);
}

std::optional<long long> KeyValueConfig::find_int(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return get_int(key);
}

void KeyValueConfig::require_known(const std::set<std::string>& allowed) const {
  for (const auto& [key, value] : values_) {
    if (!allowed.count(key)) throw Error(ErrorCode::ConfigError, origin_ + ": unknown key '" + key + "'");
  }
}

}  // namespace ikh
