#pragma once
// The quantum-observable MDP: control circuits, measurement feedback, batched rollouts
// and exact branch enumeration.

#include "qrl/fock_linalg.hpp"
#include "qrl/gates.hpp"
#include "qrl/measure.hpp"
#include "qrl/rewards.hpp"
#include "qrl/targets.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace qrl {

enum class CircuitKind { openloop_ideal, openloop_finite, feedback_finite, qubit_flip };

std::string to_string(CircuitKind k);
CircuitKind circuit_kind_from_string(const std::string& s);

struct ControlAction {
  cplx alpha{0.0, 0.0};
  SnapPhases phases;
  double flip = 0.0;  // qubit_flip kind: rotation exp(-i pi a sigma_x)

  // (Re alpha, Im alpha, phi_0, ..., phi_{Phi-1}), or (a) for the qubit-flip kind.
  std::vector<double> pack(CircuitKind kind) const;
};

// Raw Gaussian sample -> bounded circuit parameters.
struct ActionMap {
  CircuitKind kind = CircuitKind::openloop_ideal;
  double alpha_scale = 2.0;

  ControlAction operator()(const std::vector<double>& raw) const;
};

// ---- policy interface ----

struct PolicyStep {
  std::vector<double> mean;
  std::vector<double> log_std;
  double value = 0.0;
  std::vector<double> carry;  // recurrent state after this step
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual int input_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual std::vector<double> initial_carry() const = 0;
  virtual PolicyStep step(const std::vector<double>& carry, const std::vector<double>& input) const = 0;
  // Deterministic policies act with raw = mean.
  virtual bool deterministic() const { return false; }
};

using PolicyPtr = std::shared_ptr<const Policy>;

// Acts with the mean of another policy.
class MeanPolicy final : public Policy {
 public:
  explicit MeanPolicy(PolicyPtr inner) : inner_(std::move(inner)) {}
  int input_dim() const override { return inner_->input_dim(); }
  int action_dim() const override { return inner_->action_dim(); }
  std::vector<double> initial_carry() const override { return inner_->initial_carry(); }
  PolicyStep step(const std::vector<double>& carry, const std::vector<double>& input) const override {
    return inner_->step(carry, input);
  }
  bool deterministic() const override { return true; }

 private:
  PolicyPtr inner_;
};

// Open-loop fixed action sequence (one raw vector per step); value 0.
class FixedSequencePolicy final : public Policy {
 public:
  FixedSequencePolicy(std::vector<std::vector<double>> raw, int T);
  int input_dim() const override { return T_ + 1; }
  int action_dim() const override { return static_cast<int>(raw_.front().size()); }
  std::vector<double> initial_carry() const override { return {0.0}; }
  PolicyStep step(const std::vector<double>& carry, const std::vector<double>& input) const override;
  bool deterministic() const override { return true; }

 private:
  std::vector<std::vector<double>> raw_;
  int T_;
};

// ---- configuration ----

struct EnvConfig {
  FockSpacePtr fs;
  int T = 5;
  int phi = 15;
  CircuitKind kind = CircuitKind::openloop_ideal;
  double chi_tau = 0.4;
  StateVector initial;  // oscillator state; episodes start in |g> (x) initial
  RewardPtr reward;
  StateVector target;   // evaluation target (oscillator)
  double alpha_scale = 2.0;
  double leak_max = 1e-6;
  bool abort_on_leak = false;
  bool keep_final_state = false;
  int threads = 0;  // 0: hardware concurrency
  // Evaluation metric of one final joint state; defaults to reduced fidelity to `target`.
  std::function<double(const StateVector&)> branch_metric;

  int N() const { return fs->dim(); }
  int action_dim() const { return kind == CircuitKind::qubit_flip ? 1 : phi + 2; }
  int input_dim() const { return T + 1; }
  bool has_measurements() const { return kind == CircuitKind::feedback_finite; }
  ActionMap action_map() const { return {kind, alpha_scale}; }
  void validate() const;
};

// ---- episodes ----

// Policy evaluation nodes shared by all episodes of a batch: one node per distinct
// observation history. Parents precede children.
struct HistoryTree {
  std::vector<int> parent;  // -1 for depth-0 nodes
  std::vector<int> depth;
  std::vector<std::vector<double>> input;
  std::vector<PolicyStep> output;  // policy output at rollout time

  int size() const { return static_cast<int>(parent.size()); }
};

struct StepRecord {
  std::vector<double> raw;  // pre-squash Gaussian sample
  ControlAction action;
  int observation = +1;
  double log_prob = 0.0;
  double value = 0.0;
  int node = -1;  // index into the batch HistoryTree
};

struct EpisodeRecord {
  std::vector<StepRecord> steps;
  double reward = 0.0;
  RewardOutcome outcome;
  std::uint32_t history = 0;  // bit t set when o_t = -1
  double max_leak = 0.0;
  std::optional<StateVector> final_state;
};

struct Batch {
  std::vector<EpisodeRecord> episodes;
  HistoryTree tree;
};

// Clock one-hot(T) followed by the previous outcome (0 when there is none).
std::vector<double> policy_input(int t, int T, double prev_obs);
double gaussian_log_prob(const std::vector<double>& mean, const std::vector<double>& log_std,
                         const std::vector<double>& raw);

// One control step applied in place; returns the observation.
int apply_control_step(StateVector& joint, const ControlAction& action, const EnvConfig& cfg, Rng& rng);
// Kraus operators (K+, K-) of a measurement-bearing step on the oscillator (qubit starts in |g>).
std::pair<ComplexMatrix, ComplexMatrix> step_kraus(const ControlAction& action, const EnvConfig& cfg);
// Unitary part of one step as a joint matrix (oracle for tests).
ComplexMatrix step_unitary(const ControlAction& action, const EnvConfig& cfg);

EpisodeRecord run_episode(const Policy& policy, const EnvConfig& cfg, Rng& rng);
// Episode i uses Rng(derive_seed(seed, i)); identical to run_episode with that stream.
Batch run_batch(const Policy& policy, const EnvConfig& cfg, int B, std::uint64_t seed);

struct BranchResult {
  std::uint32_t history = 0;  // bit t set when o_t = -1
  std::string bits;           // "1" for +1, "0" for -1, in time order
  double probability = 0.0;
  StateVector final_state;    // joint, normalised
  double metric = 0.0;
  double leak = 0.0;
};

struct BranchReport {
  std::vector<BranchResult> branches;  // sorted by decreasing probability
  double pruned_probability = 0.0;
  double weighted_metric = 0.0;
  double total_probability = 0.0;
};

// Exact outcome tree under the policy means; branches below prune_below are dropped.
BranchReport enumerate_branches(const Policy& policy, const EnvConfig& cfg, double prune_below = 1e-14);
double evaluate_policy(const Policy& policy, const EnvConfig& cfg);

// Runs f(i) for i in [0, n) on up to `threads` workers with a fixed static partition.
void parallel_for(int n, int threads, const std::function<void(int)>& f);
int resolve_threads(int requested);

}  // namespace qrl
