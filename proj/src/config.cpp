#include "qrl/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace qrl {

const std::vector<KeySpec>& config_schema() {
  using V = ValueType;
  static const std::vector<KeySpec> schema = {
      // experiment
      {"name", V::text, "custom", "experiment name"},
      {"task", V::text, "state", "state | gate | qubit_flip"},
      {"target", V::text, "fock:1",
       "state target: fock:n | coherent:re:im | cat:beta[:sign] | binomial:n=c;n=c | gkp:delta"},
      {"gate", V::text, "H", "logical gate for task=gate: H | X | sqrtH"},
      {"encoding", V::text, "fock", "logical encoding for task=gate: fock | gkp"},
      {"code_delta", V::real, "0.3", "GKP envelope of the logical encoding"},
      // reward
      {"reward", V::text, "fock", "fock | projector | wigner | char | gkp | qubit"},
      {"reward_points", V::integer, "1", "phase-space points per episode (wigner, char)"},
      {"table_extent", V::real, "0", "half-width of the phase-space table (0: automatic)"},
      {"table_points", V::integer, "201", "grid points per axis of the phase-space table"},
      // environment
      {"N", V::integer, "100", "oscillator truncation"},
      {"desk_N", V::integer, "40", "oscillator truncation used when scale < 1"},
      {"T", V::integer, "5", "control steps per episode"},
      {"phi", V::integer, "15", "SNAP truncation"},
      {"circuit", V::text, "openloop_ideal", "openloop_ideal | openloop_finite | feedback_finite | qubit_flip"},
      {"chi_tau", V::real, "0.4", "SNAP pulse selectivity"},
      {"alpha_scale", V::real, "2", "bound on |alpha|"},
      {"leak_max", V::real, "1e-6", "truncation leak threshold"},
      {"abort_on_leak", V::boolean, "false", "abort episodes whose leak exceeds leak_max"},
      {"threads", V::integer, "0", "rollout threads (0: hardware concurrency)"},
      // policy
      {"policy", V::text, "recurrent", "recurrent | constant"},
      {"lstm", V::integer, "12", "LSTM units"},
      {"dense", V::int_list, "", "dense layer widths"},
      {"init_std", V::real, "0.3", "initial policy standard deviation"},
      {"init_mean", V::real, "0", "initial mean of the constant policy"},
      {"init_weights", V::text, "", "checkpoint whose weights initialise the model (same architecture)"},
      // ppo
      {"B", V::integer, "1000", "episodes per epoch"},
      {"epochs", V::integer, "4000", "training epochs"},
      {"lr", V::schedule, "0.001@0", "learning-rate schedule lr@epoch,..."},
      {"clip", V::real, "0.1", "importance-ratio clipping epsilon"},
      {"value_weight", V::real, "0.005", "value loss weight"},
      {"opt_passes", V::integer, "5", "optimisation passes per batch"},
      {"gamma", V::real, "1", "discount"},
      {"entropy_coef", V::real, "0", "entropy bonus (ablation)"},
      {"normalize_advantages", V::boolean, "false", "advantage normalisation (ablation)"},
      {"grad_clip", V::real, "1", "global gradient-norm clip"},
      // harness
      {"seeds", V::int_list, "0", "training seeds"},
      {"eval_interval", V::integer, "50", "epochs between evaluations"},
      {"checkpoint_interval", V::integer, "0", "epochs between checkpoints (0: eval_interval)"},
      {"stop_at_metric", V::real, "0", "stop a seed once its evaluation reaches this value (0: off)"},
      {"output_dir", V::text, "runs", "artifact directory"},
      // baselines
      {"oracle", V::text, "averaged", "exact | averaged"},
      {"shots", V::integer, "1000", "reward shots per averaged evaluation"},
      {"budget_episodes", V::integer, "4000000", "total episode budget of a baseline run"},
      {"init_scale", V::real_list, "0.1", "standard deviations of the random initial raw vector"},
      {"nm_step", V::real, "0.25", "initial simplex offset"},
      {"sa_visit", V::real, "2.62", "annealing visiting parameter"},
      {"sa_accept", V::real, "-5", "annealing acceptance parameter"},
      {"sa_initial_temp", V::real, "5230", "annealing initial temperature"},
      {"sa_restart_ratio", V::real, "2e-05", "annealing restart temperature ratio"},
      {"sa_bound", V::real, "3", "annealing box half-width on raw parameters"},
      {"baseline_eval_interval", V::integer, "50", "evaluations between exact-fidelity trace points"},
  };
  return schema;
}

const KeySpec& key_spec(const std::string& key) {
  for (const auto& k : config_schema())
    if (k.key == key) return k;
  throw ConfigError("unknown config key '" + key + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

std::int64_t parse_int(const std::string& s, const std::string& key) {
  std::int64_t v = 0;
  const auto t = trim(s);
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty())
    throw ConfigError("config key '" + key + "': '" + s + "' is not an integer");
  return v;
}

double parse_real(const std::string& s, const std::string& key) {
  const auto t = trim(s);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty())
    throw ConfigError("config key '" + key + "': '" + s + "' is not a number");
  return v;
}

std::string fmt_real(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

bool parse_bool(const std::string& s, const std::string& key) {
  std::string t = trim(s);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("config key '" + key + "': '" + s + "' is not a boolean");
}

}  // namespace

std::string canonical_value(ValueType type, const std::string& value, const std::string& key) {
  switch (type) {
    case ValueType::integer:
      return std::to_string(parse_int(value, key));
    case ValueType::real:
      return fmt_real(parse_real(value, key));
    case ValueType::boolean:
      return parse_bool(value, key) ? "true" : "false";
    case ValueType::text:
      return trim(value);
    case ValueType::int_list: {
      std::string out;
      for (const auto& item : split(value, ',')) out += (out.empty() ? "" : ",") + std::to_string(parse_int(item, key));
      return out;
    }
    case ValueType::real_list: {
      std::string out;
      for (const auto& item : split(value, ',')) out += (out.empty() ? "" : ",") + fmt_real(parse_real(item, key));
      return out;
    }
    case ValueType::schedule: {
      std::vector<std::pair<int, double>> pts;
      for (const auto& item : split(value, ',')) {
        const auto at = item.find('@');
        if (at == std::string::npos) throw ConfigError("config key '" + key + "': schedule items are lr@epoch");
        const double lr = parse_real(item.substr(0, at), key);
        const auto ep = parse_int(item.substr(at + 1), key);
        if (!(lr > 0.0) || ep < 0) throw ConfigError("config key '" + key + "': need lr > 0 and epoch >= 0");
        pts.emplace_back(static_cast<int>(ep), lr);
      }
      if (pts.empty()) throw ConfigError("config key '" + key + "': empty schedule");
      std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      std::string out;
      for (const auto& [e, lr] : pts) out += (out.empty() ? "" : ",") + fmt_real(lr) + "@" + std::to_string(e);
      return out;
    }
  }
  return value;
}

ExperimentConfig::ExperimentConfig() {
  for (const auto& k : config_schema()) values_[k.key] = canonical_value(k.type, k.fallback, k.key);
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const KeySpec& spec = key_spec(key);
  values_[key] = canonical_value(spec.type, value, key);
}

void ExperimentConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::string ExperimentConfig::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::int64_t ExperimentConfig::integer(const std::string& key) const { return parse_int(str(key), key); }
double ExperimentConfig::real(const std::string& key) const { return parse_real(str(key), key); }
bool ExperimentConfig::boolean(const std::string& key) const { return parse_bool(str(key), key); }

std::vector<std::int64_t> ExperimentConfig::int_list(const std::string& key) const {
  std::vector<std::int64_t> out;
  for (const auto& item : split(str(key), ',')) out.push_back(parse_int(item, key));
  return out;
}

std::vector<double> ExperimentConfig::real_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split(str(key), ',')) out.push_back(parse_real(item, key));
  return out;
}

std::vector<std::pair<int, double>> ExperimentConfig::schedule(const std::string& key) const {
  std::vector<std::pair<int, double>> out;
  for (const auto& item : split(str(key), ',')) {
    const auto at = item.find('@');
    out.emplace_back(static_cast<int>(parse_int(item.substr(at + 1), key)), parse_real(item.substr(0, at), key));
  }
  return out;
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    try {
      cfg.set_assignment(line);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file " + path);
  out << canonical();
}

void ExperimentConfig::apply_env_overrides() {
  for (const auto& k : config_schema()) {
    std::string var = "QRL_" + k.key;
    std::transform(var.begin(), var.end(), var.begin(), [](unsigned char c) { return std::toupper(c); });
    if (const char* v = std::getenv(var.c_str())) set(k.key, v);
  }
}

}  // namespace qrl
