#include "qrl/registry.hpp"

#include <cmath>
#include <functional>
#include <map>

namespace qrl {

namespace {

using Assignments = std::vector<std::pair<std::string, std::string>>;

ExperimentConfig make(const std::string& name, const Assignments& kv) {
  ExperimentConfig cfg;
  cfg.set("name", name);
  for (const auto& [k, v] : kv) cfg.set(k, v);
  return cfg;
}

Assignments fock_row(int n) {
  return {{"task", "state"},     {"target", "fock:" + std::to_string(n)}, {"reward", "fock"},
          {"N", "100"},          {"desk_N", "40"},                        {"T", "5"},
          {"phi", "15"},         {"circuit", "openloop_ideal"},           {"B", "1000"},
          {"epochs", "4000"},    {"lr", "1e-3@0,1e-4@500"},               {"clip", "0.1"},
          {"lstm", "16"},        {"dense", "100,50"}};
}

const std::map<std::string, std::function<ExperimentConfig(const std::string&)>>& table() {
  static const auto rows = [] {
    std::map<std::string, std::function<ExperimentConfig(const std::string&)>> r;
    for (int n = 1; n <= 10; ++n)
      r["fock" + std::to_string(n)] = [n](const std::string& name) { return make(name, fock_row(n)); };
    r["cat2"] = [](const std::string& name) {
      return make(name, {{"target", "cat:2:1"}, {"reward", "wigner"}, {"reward_points", "1"}, {"N", "100"},
                         {"desk_N", "40"}, {"T", "5"}, {"phi", "10"}, {"B", "1000"}, {"epochs", "20000"},
                         {"lr", "1e-3@0"}, {"clip", "0.1"}, {"lstm", "12"}, {"dense", ""}});
    };
    r["bin1"] = [](const std::string& name) {
      return make(name, {{"target", "binomial:3=1.7320508075688772;9=1"}, {"reward", "wigner"},
                         {"reward_points", "1"}, {"N", "100"}, {"desk_N", "40"}, {"T", "8"}, {"phi", "15"},
                         {"B", "500"}, {"epochs", "20000"}, {"lr", "1e-3@0"}, {"clip", "0.2"}, {"lstm", "12"},
                         {"dense", "50"}});
    };
    r["gkp"] = [](const std::string& name) {
      return make(name, {{"target", "gkp:0.35"}, {"reward", "gkp"}, {"alpha_scale", "4"}, {"N", "200"}, {"desk_N", "60"}, {"T", "9"},
                         {"phi", "30"}, {"B", "1000"}, {"epochs", "10000"}, {"lr", "1e-3@0"}, {"clip", "0.25"},
                         {"lstm", "12"}, {"dense", ""}});
    };
    r["fock3-adaptive"] = [](const std::string& name) {
      return make(name, {{"target", "fock:3"}, {"reward", "fock"}, {"N", "100"}, {"desk_N", "40"}, {"T", "5"},
                         {"phi", "7"}, {"circuit", "feedback_finite"}, {"chi_tau", "0.4"}, {"B", "1000"},
                         {"epochs", "25000"}, {"lr", "1e-3@0,1e-4@1000"}, {"clip", "0.1"}, {"lstm", "16"},
                         {"dense", "100,50"}});
    };
    // Open-loop ideal-SNAP counterpart of fock3-adaptive, used for the model-bias comparison.
    r["fock3-ideal"] = [](const std::string& name) {
      auto cfg = registry_lookup("fock3-adaptive");
      cfg.set("name", name);
      cfg.set("circuit", "openloop_ideal");
      cfg.set("epochs", "4000");
      cfg.set("lr", "1e-3@0,1e-4@500");
      return cfg;
    };
    auto gate = [](const std::string& name, const std::string& g, const std::string& epochs) {
      return make(name, {{"task", "gate"}, {"gate", g}, {"encoding", "fock"}, {"reward", "wigner"},
                         {"reward_points", "1"}, {"N", "100"}, {"desk_N", "40"}, {"T", "4"}, {"phi", "15"},
                         {"B", "500"}, {"epochs", epochs}, {"lr", "1e-3@0"}, {"clip", "0.1"}, {"lstm", "12"},
                         {"dense", "50"}});
    };
    r["gate-H"] = [gate](const std::string& name) { return gate(name, "H", "2000"); };
    r["gate-X"] = [gate](const std::string& name) { return gate(name, "X", "4000"); };
    r["gate-sqrtH"] = [](const std::string& name) {
      return make(name, {{"task", "gate"}, {"gate", "sqrtH"}, {"encoding", "gkp"}, {"code_delta", "0.3"},
                         {"alpha_scale", "4"},
                         {"reward", "wigner"}, {"reward_points", "1"}, {"N", "150"}, {"desk_N", "100"}, {"T", "1"},
                         {"phi", "80"}, {"B", "500"}, {"epochs", "8000"}, {"lr", "1e-3@0"}, {"clip", "0.1"},
                         {"lstm", "12"}, {"dense", "50"}});
    };
    r["qubit-flip"] = [](const std::string& name) {
      return make(name, {{"task", "qubit_flip"}, {"circuit", "qubit_flip"}, {"reward", "qubit"}, {"N", "2"},
                         {"desk_N", "2"}, {"T", "1"}, {"phi", "1"}, {"policy", "constant"}, {"init_mean", "0"},
                         {"init_std", "0.1"}, {"B", "30"}, {"epochs", "50"}, {"lr", "1e-2@0"}, {"clip", "0.1"},
                         {"eval_interval", "1"}});
    };
    return r;
  }();
  return rows;
}

}  // namespace

std::vector<std::string> experiment_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : table()) out.push_back(k);
  return out;
}

ExperimentConfig registry_lookup(const std::string& name) {
  const auto it = table().find(name);
  if (it == table().end()) {
    std::string known;
    for (const auto& n : experiment_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown experiment '" + name + "'; available: " + known);
  }
  return it->second(name);
}

void apply_scale(ExperimentConfig& cfg, double scale) {
  if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("scale must lie in (0, 1]");
  if (scale == 1.0) return;
  auto scaled = [&](const std::string& key) {
    const double v = std::ceil(static_cast<double>(cfg.integer(key)) * scale);
    cfg.set(key, std::to_string(static_cast<long long>(std::max(1.0, v))));
  };
  cfg.set("N", cfg.str("desk_N"));
  scaled("B");
  scaled("epochs");
  scaled("eval_interval");
}

}  // namespace qrl
