#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace covbound::cli {

using Json = nlohmann::json;

/// Read-only view of one config object. Every accessor records the key; call
/// finish() once all keys are consumed to reject anything unrecognized.
class ConfigSection {
 public:
  ConfigSection(const Json& node, std::string path);

  bool has(const std::string& key) const;
  const Json& at(const std::string& key);
  const Json* find(const std::string& key);

  std::uint64_t uint64(const std::string& key);
  std::uint64_t uint64_or(const std::string& key, std::uint64_t fallback);
  long long integer(const std::string& key);
  long long integer_or(const std::string& key, long long fallback);
  double number(const std::string& key);
  double number_or(const std::string& key, double fallback);
  bool boolean_or(const std::string& key, bool fallback);
  std::string text(const std::string& key);
  std::string text_or(const std::string& key, const std::string& fallback);
  std::vector<double> numbers(const std::string& key);
  std::vector<long long> integers(const std::string& key);
  ConfigSection section(const std::string& key);

  void finish() const;
  const std::string& path() const { return path_; }
  std::string key_path(const std::string& key) const { return path_ + "." + key; }

 private:
  const Json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

Json load_config(const std::string& path);

/// Applies `a.b.0.c=value` style overrides. The value is parsed as JSON when
/// possible, otherwise taken as a string.
void apply_override(Json& config, const std::string& assignment);

}  // namespace covbound::cli
