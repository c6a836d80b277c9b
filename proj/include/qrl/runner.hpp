#pragma once
// Experiment execution: environment construction from a config, training runs with
// evaluation and checkpoints, baseline runs, and history reports.

#include "qrl/baselines.hpp"
#include "qrl/config.hpp"
#include "qrl/env.hpp"
#include "qrl/ppo.hpp"
#include "qrl/serialize.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace qrl {

// Non-finite loss, gradient or weights (CLI exit code 3).
class NumericalAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Eigen::Matrix2cd logical_gate(const std::string& name);

// Everything derived from an ExperimentConfig that stays fixed during a run.
class ExperimentSetup {
 public:
  explicit ExperimentSetup(const ExperimentConfig& cfg);

  const ExperimentConfig& config() const { return cfg_; }
  bool is_gate() const { return !gate_inputs_.empty(); }
  int num_inputs() const { return is_gate() ? static_cast<int>(gate_inputs_.size()) : 1; }

  // Environment for input i (gate tasks: cardinal i in the order +X, -X, +Y, -Y, +Z, -Z).
  EnvConfig env(int input = 0) const;
  // Gate tasks draw one cardinal input per epoch, shared by the whole batch.
  int epoch_input(std::uint64_t seed, int epoch) const;

  // Noise-free score of a deterministic policy: branch-weighted fidelity (or mean
  // stabilizer value for GKP rewards, or excitation probability for the qubit flip);
  // gate tasks average over the six cardinal inputs.
  double evaluate(const Policy& policy) const;

  std::unique_ptr<TrainableModel> make_model(std::uint64_t seed) const;
  PpoConfig ppo() const;

 private:
  ExperimentConfig cfg_;
  EnvConfig base_;
  std::vector<StateVector> gate_inputs_, gate_targets_;
  std::vector<RewardPtr> gate_rewards_;
};

struct MetricsRow {
  int epoch = 0;
  std::int64_t episodes_cumulative = 0;
  double mean_return = 0.0;
  double entropy = 0.0;
  bool evaluated = false;
  double eval_metric = 0.0;
  double wallclock_s = 0.0;
};

void write_metrics_header(std::ostream& os, bool with_method);
void write_metrics_row(std::ostream& os, const MetricsRow& r, const std::string& method = "");

struct SeedResult {
  std::uint64_t seed = 0;
  double final_metric = 0.0;
  double best_metric = 0.0;
  int best_epoch = -1;
  int epochs_run = 0;
  std::int64_t episodes = 0;
  double wallclock_s = 0.0;
  bool stopped_early = false;
  std::string dir;
};

struct RunArtifacts {
  std::string dir;
  std::vector<SeedResult> seeds;
  int best = -1;  // index into seeds
  std::string report_path;
};

struct RunOptions {
  bool write_files = true;
  bool resume = false;  // continue from <dir>/seed<k>/checkpoint.bin when present
  std::function<void(const std::string&)> log;
  std::function<void(std::uint64_t seed, const MetricsRow&)> on_epoch;
};

RunArtifacts run_training(const ExperimentConfig& cfg, const RunOptions& opt = {});
SeedResult train_seed(const ExperimentSetup& setup, std::uint64_t seed, const RunOptions& opt = {});

struct BaselineRun {
  std::uint64_t seed = 0;
  double init_scale = 0.0;
  double final_fidelity = 0.0;
  OptimResult result;
  std::int64_t episodes = 0;
  double wallclock_s = 0.0;
};

struct BaselineArtifacts {
  std::string method;
  std::vector<BaselineRun> runs;
  int best = -1;
  std::string dir;
};

// method: "nm" or "sa". Budget per run: budget_episodes, split into whole evaluations.
BaselineArtifacts run_baseline(const ExperimentConfig& cfg, const std::string& method, const RunOptions& opt = {});

struct HistoryReport {
  BranchReport branches;
  double best_branch_metric = 0.0;
  std::string best_history;
};

HistoryReport report_histories(const ExperimentSetup& setup, const Policy& policy);
void write_history_csv(std::ostream& os, const HistoryReport& report);

// Loads a checkpoint and its embedded config; overrides are applied before the setup.
struct LoadedRun {
  Checkpoint checkpoint;
  ExperimentConfig config;
  std::unique_ptr<TrainableModel> model;
};
LoadedRun load_run(const std::string& checkpoint_path, const std::vector<std::string>& overrides = {});

}  // namespace qrl
