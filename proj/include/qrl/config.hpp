#pragma once
// Flat typed key-value experiment configuration.
//
// File format: one `key = value` per line, `#` starts a comment. Lists are comma
// separated; learning-rate schedules are `lr@epoch` items, e.g. `1e-3@0,1e-4@500`.
// Environment variables QRL_<KEY> (key upper-cased) override file values.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qrl {

// Malformed or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ValueType { integer, real, boolean, text, int_list, real_list, schedule };

struct KeySpec {
  std::string key;
  ValueType type;
  std::string fallback;
  std::string doc;
};

const std::vector<KeySpec>& config_schema();
const KeySpec& key_spec(const std::string& key);

class ExperimentConfig {
 public:
  ExperimentConfig();  // every key at its schema default

  // Parses and canonicalises the value; throws ConfigError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  // "key=value".
  void set_assignment(const std::string& assignment);
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string str(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<std::int64_t> int_list(const std::string& key) const;
  std::vector<double> real_list(const std::string& key) const;
  std::vector<std::pair<int, double>> schedule(const std::string& key) const;

  // Sorted `key = value` lines; parse(canonical()) reproduces the config exactly.
  std::string canonical() const;
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;
  // Applies QRL_<KEY> variables found in the environment.
  void apply_env_overrides();

  const std::map<std::string, std::string>& values() const { return values_; }
  bool operator==(const ExperimentConfig& o) const { return values_ == o.values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Canonical text of a value of the given type; throws ConfigError when it does not parse.
std::string canonical_value(ValueType type, const std::string& value, const std::string& key);

}  // namespace qrl
