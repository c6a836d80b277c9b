#pragma once
// Derivative-free baselines over the flattened open-loop control vector: Nelder-Mead and
// generalized simulated annealing without local search. Both share the env code path.

#include "qrl/env.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace qrl {

enum class OracleMode { exact_infidelity, averaged_reward };

std::string to_string(OracleMode m);

// Cost of a raw control vector x (T blocks of action_dim raw entries, mapped through the
// same action map as the RL agent). Averaged mode charges exactly `shots` episodes per call;
// exact mode charges one.
class CostOracle {
 public:
  CostOracle(EnvConfig env, OracleMode mode, int shots, std::uint64_t seed);

  double operator()(const std::vector<double>& x);
  // Noise-free branch-weighted fidelity of x (not charged to the budget).
  double fidelity(const std::vector<double>& x) const;

  int dim() const { return env_.T * env_.action_dim(); }
  OracleMode mode() const { return mode_; }
  int shots() const { return shots_; }
  int episodes_per_eval() const { return mode_ == OracleMode::exact_infidelity ? 1 : shots_; }
  std::int64_t evaluations() const { return evaluations_; }
  std::int64_t episodes() const { return episodes_; }
  const EnvConfig& env() const { return env_; }

 private:
  EnvConfig env_;
  OracleMode mode_;
  int shots_;
  std::uint64_t seed_;
  std::int64_t evaluations_ = 0, episodes_ = 0;
};

// Unflatten x into one raw action per step.
FixedSequencePolicy sequence_policy(const std::vector<double>& x, const EnvConfig& env);

struct TraceRow {
  std::int64_t evaluation = 0;
  std::int64_t episodes = 0;
  double cost = 0.0;
  double best_cost = 0.0;
};

struct OptimResult {
  std::vector<double> best_x;
  double best_cost = 0.0;
  std::int64_t evaluations = 0;
  std::vector<TraceRow> trace;
};

using Objective = std::function<double(const std::vector<double>&)>;
// Called after each evaluation with the trace row and the current best point.
using TraceHook = std::function<void(const TraceRow&, const std::vector<double>&)>;

struct NelderMeadOptions {
  double reflect = 1.0, expand = 2.0, contract = 0.5, shrink = 0.5;
  double initial_step = 0.25;  // absolute offset of the initial simplex vertices
  std::int64_t max_evals = 2000;
  double xatol = 0.0, fatol = 0.0;  // zero: run to the budget
};

OptimResult nelder_mead(const Objective& f, std::vector<double> x0, const NelderMeadOptions& opt,
                        const TraceHook& hook = {});

struct AnnealingOptions {
  double visit = 2.62;
  double accept = -5.0;
  double initial_temp = 5230.0;
  double restart_temp_ratio = 2e-5;
  double lower = -3.0, upper = 3.0;
  std::int64_t max_evals = 2000;
  std::uint64_t seed = 0;
};

OptimResult simulated_annealing(const Objective& f, std::vector<double> x0, const AnnealingOptions& opt,
                                const TraceHook& hook = {});

// Draw from the Tsallis visiting distribution (dimension dim) at a given temperature.
std::vector<double> visiting_step(double temperature, int dim, double qv, Rng& rng);

}  // namespace qrl
