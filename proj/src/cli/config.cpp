#include "covbound/cli/config.hpp"

#include <fstream>
#include <sstream>

#include "covbound/errors.hpp"

namespace covbound::cli {

ConfigSection::ConfigSection(const Json& node, std::string path)
    : node_(node), path_(std::move(path)) {
  if (!node_.is_object()) throw ConfigError(path_ + ": expected an object");
}

bool ConfigSection::has(const std::string& key) const { return node_.contains(key); }

const Json& ConfigSection::at(const std::string& key) {
  seen_.insert(key);
  if (!node_.contains(key)) throw ConfigError(key_path(key) + ": missing required field");
  return node_.at(key);
}

const Json* ConfigSection::find(const std::string& key) {
  seen_.insert(key);
  return node_.contains(key) ? &node_.at(key) : nullptr;
}

std::uint64_t ConfigSection::uint64(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ConfigError(key_path(key) + ": expected a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

std::uint64_t ConfigSection::uint64_or(const std::string& key, std::uint64_t fallback) {
  return has(key) ? uint64(key) : (seen_.insert(key), fallback);
}

long long ConfigSection::integer(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_number_integer()) throw ConfigError(key_path(key) + ": expected an integer");
  return v.get<long long>();
}

long long ConfigSection::integer_or(const std::string& key, long long fallback) {
  return has(key) ? integer(key) : (seen_.insert(key), fallback);
}

double ConfigSection::number(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_number()) throw ConfigError(key_path(key) + ": expected a number");
  return v.get<double>();
}

double ConfigSection::number_or(const std::string& key, double fallback) {
  return has(key) ? number(key) : (seen_.insert(key), fallback);
}

bool ConfigSection::boolean_or(const std::string& key, bool fallback) {
  if (!has(key)) {
    seen_.insert(key);
    return fallback;
  }
  const Json& v = at(key);
  if (!v.is_boolean()) throw ConfigError(key_path(key) + ": expected true or false");
  return v.get<bool>();
}

std::string ConfigSection::text(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_string()) throw ConfigError(key_path(key) + ": expected a string");
  return v.get<std::string>();
}

std::string ConfigSection::text_or(const std::string& key, const std::string& fallback) {
  return has(key) ? text(key) : (seen_.insert(key), fallback);
}

std::vector<double> ConfigSection::numbers(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_array()) throw ConfigError(key_path(key) + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(key_path(key) + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<long long> ConfigSection::integers(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_array()) throw ConfigError(key_path(key) + ": expected an array of integers");
  std::vector<long long> out;
  for (const auto& x : v) {
    if (!x.is_number_integer()) throw ConfigError(key_path(key) + ": expected an array of integers");
    out.push_back(x.get<long long>());
  }
  return out;
}

ConfigSection ConfigSection::section(const std::string& key) {
  return ConfigSection(at(key), key_path(key));
}

void ConfigSection::finish() const {
  for (const auto& [key, value] : node_.items()) {
    if (!seen_.count(key)) throw ConfigError(key_path(key) + ": unknown key");
  }
}

Json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return Json::parse(buffer.str());
  } catch (const Json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

void apply_override(Json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const Json::parse_error&) {
    value = raw;
  }

  Json* node = &config;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& key = parts[i];
    const bool last = i + 1 == parts.size();
    if (node->is_array()) {
      std::size_t index = 0;
      try {
        index = std::stoul(key);
      } catch (const std::exception&) {
        throw ConfigError("override '" + path + "': '" + key + "' is not an array index");
      }
      if (index >= node->size()) throw ConfigError("override '" + path + "': index out of range");
      node = &(*node)[index];
    } else {
      if (!node->is_object()) *node = Json::object();
      node = &(*node)[key];
    }
    if (last) *node = value;
  }
}

}  // namespace covbound::cli
