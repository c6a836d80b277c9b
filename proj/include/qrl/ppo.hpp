#pragma once
// Proximal policy optimisation over batches of terminal-reward episodes.

#include "qrl/env.hpp"
#include "qrl/neural.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace qrl {

struct PpoConfig {
  double clip = 0.1;
  double value_weight = 5e-3;
  int opt_passes = 5;
  LrSchedule lr;
  int B = 1000;
  int epochs = 4000;
  double gamma = 1.0;
  double entropy_coef = 0.0;          // ablation only
  bool normalize_advantages = false;  // ablation only
  double grad_clip = 1.0;

  void validate() const;
};

// A batch with per-step returns-to-go and advantages, indexed [episode][step].
struct TrainBatch {
  Batch batch;
  std::vector<std::vector<double>> returns;
  std::vector<std::vector<double>> advantages;

  std::size_t num_steps() const;
};

// Terminal-only rewards: return-to-go at step t is gamma^(T-1-t) R. Advantages use the
// value recorded at rollout time.
TrainBatch compute_advantages(Batch batch, double gamma, bool normalize = false);

struct LossTerms {
  double loss = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;        // mean per-step Gaussian entropy
  double clip_fraction = 0.0;  // share of steps on the clipped branch
  double approx_kl = 0.0;
};

// Mean over all steps of -min(rho A, clip(rho) A) + w_V (R - V)^2 - c_H H. When grad is
// non-null it receives d(loss)/d(theta), accumulated from zero.
LossTerms ppo_loss(const TrainBatch& tb, const TrainableModel& model, const PpoConfig& cfg,
                   std::vector<double>* grad = nullptr);

struct EpochMetrics {
  int epoch = 0;
  double mean_return = 0.0;
  double entropy = 0.0;
  double loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
  double max_leak = 0.0;
  std::int64_t episodes_cumulative = 0;
};

class PpoTrainer {
 public:
  PpoTrainer(std::unique_ptr<TrainableModel> model, PpoConfig cfg, std::uint64_t seed);

  // One epoch: B episodes under the current stochastic policy, then opt_passes full-batch
  // Adam updates. The rollout stream depends only on (seed, epoch).
  EpochMetrics train_epoch(const EnvConfig& env);

  TrainableModel& model() { return *model_; }
  const TrainableModel& model() const { return *model_; }
  const PpoConfig& config() const { return cfg_; }
  PpoConfig& config() { return cfg_; }
  int epoch() const { return epoch_; }
  std::int64_t episodes() const { return episodes_; }
  std::uint64_t seed() const { return seed_; }
  const AdamState& adam() const { return adam_; }

  // Resume from a checkpoint.
  void restore(std::vector<double> theta, AdamState adam, int epoch, std::int64_t episodes);

 private:
  std::unique_ptr<TrainableModel> model_;
  PpoConfig cfg_;
  std::uint64_t seed_;
  AdamState adam_;
  int epoch_ = 0;
  std::int64_t episodes_ = 0;
};

std::uint64_t epoch_seed(std::uint64_t seed, int epoch);

// Acts with the mean action.
PolicyPtr extract_deterministic(const TrainableModel& model);
PolicyPtr extract_deterministic(PolicyPtr policy);

// ---- decision trees ----

struct DecisionNode {
  int depth = 0;
  std::string history;       // prior outcomes, "1" for +1 and "0" for -1
  std::vector<double> mean;  // raw action mean
  std::vector<double> packed;  // mapped circuit parameters
};

struct DecisionTree {
  int T = 0;
  CircuitKind kind = CircuitKind::feedback_finite;
  std::vector<DecisionNode> nodes;  // by depth, then history in lexicographic order

  // Node for a given prefix of outcomes (length = depth).
  const DecisionNode& at(const std::string& history) const;
  std::string to_json() const;
};

// Mean action for every outcome prefix; 2^t nodes at depth t.
DecisionTree export_decision_tree(const Policy& policy, const EnvConfig& cfg);

}  // namespace qrl
