#pragma once
// Recurrent Gaussian policy and value networks with hand-written reverse-mode gradients.
//
// A network is LSTM(H) -> Dense(tanh)* -> linear output. Forward and backward passes run
// over a tree of inputs (one node per distinct observation history), which reduces to a
// sequence for a single episode.

#include "qrl/env.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace qrl {

struct NetSpec {
  int input_dim = 0;
  int lstm_units = 12;
  std::vector<int> dense;
  int output_dim = 1;
};

// Parameter layout of one network inside a flat weight vector.
class RecurrentNet {
 public:
  RecurrentNet() = default;
  RecurrentNet(const NetSpec& spec, std::size_t offset);

  const NetSpec& spec() const { return spec_; }
  std::size_t offset() const { return offset_; }
  std::size_t size() const { return size_; }
  int carry_size() const { return 2 * spec_.lstm_units; }

  struct NodeCache {
    std::vector<double> x, h_prev, c_prev;
    std::vector<double> gates;  // activated i, f, g, o (4H)
    std::vector<double> c, tanh_c, h;
    std::vector<std::vector<double>> act;  // dense activations
    std::vector<double> out;
  };

  // One node given the parent's carry [h, c] (empty for the root).
  NodeCache forward_node(const double* theta, const std::vector<double>& carry, const std::vector<double>& x) const;
  // Nodes in topological order; parent[k] < k or -1.
  std::vector<NodeCache> forward_tree(const double* theta, const std::vector<int>& parent,
                                      const std::vector<std::vector<double>>& inputs) const;
  // Accumulates d(loss)/d(theta) into grad given d(loss)/d(out) per node.
  void backward_tree(const double* theta, const std::vector<int>& parent, const std::vector<NodeCache>& cache,
                     const std::vector<std::vector<double>>& d_out, double* grad) const;

  // Slices of the flat vector, relative to offset().
  struct Block {
    std::size_t at, rows, cols;
  };
  Block lstm_w() const { return blocks_[0]; }
  Block lstm_u() const { return blocks_[1]; }
  Block lstm_b() const { return blocks_[2]; }
  Block dense_w(std::size_t l) const { return blocks_[3 + 2 * l]; }
  Block dense_b(std::size_t l) const { return blocks_[4 + 2 * l]; }
  Block out_w() const { return blocks_[3 + 2 * spec_.dense.size()]; }
  Block out_b() const { return blocks_[4 + 2 * spec_.dense.size()]; }

 private:
  NetSpec spec_;
  std::size_t offset_ = 0, size_ = 0;
  std::vector<Block> blocks_;
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 1.0;
inline double clamp_log_std(double v) { return v < kLogStdMin ? kLogStdMin : (v > kLogStdMax ? kLogStdMax : v); }

struct PolicyArch {
  int input_dim = 0;
  int action_dim = 0;
  int lstm_units = 12;
  std::vector<int> dense;
  double init_std = 0.3;
};

// Policy network (outputs mean and raw log-std) plus a separate value network.
class PolicyParams {
 public:
  PolicyParams() = default;
  PolicyParams(const PolicyArch& arch, std::uint64_t seed);

  const PolicyArch& arch() const { return arch_; }
  const RecurrentNet& policy_net() const { return pnet_; }
  const RecurrentNet& value_net() const { return vnet_; }
  std::vector<double> theta;

  std::size_t size() const { return theta.size(); }

 private:
  PolicyArch arch_;
  RecurrentNet pnet_, vnet_;
};

struct ForwardStep {
  std::vector<double> mean, log_std;
  double value = 0.0;
};

// Per-step outputs over one input sequence.
std::vector<ForwardStep> forward(const PolicyParams& params, const std::vector<std::vector<double>>& inputs);

// Stochastic Gaussian policy backed by a copy of the weights.
class NetworkPolicy final : public Policy {
 public:
  explicit NetworkPolicy(PolicyParams params) : params_(std::move(params)) {}
  int input_dim() const override { return params_.arch().input_dim; }
  int action_dim() const override { return params_.arch().action_dim; }
  std::vector<double> initial_carry() const override;
  PolicyStep step(const std::vector<double>& carry, const std::vector<double>& input) const override;
  const PolicyParams& params() const { return params_; }

 private:
  PolicyParams params_;
};

// Diagonal Gaussian log-density of raw given mean and log-std, and its gradients.
double log_prob(const std::vector<double>& mean, const std::vector<double>& log_std, const std::vector<double>& raw);
void log_prob_grad(const std::vector<double>& mean, const std::vector<double>& log_std,
                   const std::vector<double>& raw, std::vector<double>& d_mean, std::vector<double>& d_log_std);

// ---- optimisation ----

// Piecewise-constant learning rate by epoch: the value of the last boundary <= epoch.
struct LrSchedule {
  std::vector<std::pair<int, double>> points{{0, 1e-3}};
  double at(int epoch) const;
};

struct AdamState {
  std::vector<double> m, v;
  std::int64_t step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-7;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// Clips the global gradient norm to clip_norm, then applies one Adam update. Returns the
// pre-clip norm. Throws std::domain_error on non-finite gradients.
double adam_step(std::vector<double>& theta, const std::vector<double>& grad, AdamState& state, double lr,
                 double clip_norm = 1.0);

// ---- trainable models ----

// Outputs of a model over a history tree, plus what its backward pass needs.
class TreeEval {
 public:
  virtual ~TreeEval() = default;
  std::vector<std::vector<double>> mean, log_std;  // log_std already clamped
  std::vector<std::vector<char>> log_std_active;    // 0 where the clamp saturates
  std::vector<double> value;
  // Accumulates into grad; entries may be empty for nodes without a loss term.
  virtual void backward(const std::vector<std::vector<double>>& d_mean,
                        const std::vector<std::vector<double>>& d_log_std, const std::vector<double>& d_value,
                        std::vector<double>& grad) const = 0;
};

class TrainableModel {
 public:
  virtual ~TrainableModel() = default;
  virtual std::vector<double>& theta() = 0;
  virtual const std::vector<double>& theta() const = 0;
  virtual int input_dim() const = 0;
  virtual int action_dim() const = 0;
  // Read-only policy with a copy of the current weights.
  virtual PolicyPtr snapshot() const = 0;
  virtual std::unique_ptr<TreeEval> evaluate_tree(const std::vector<int>& parent,
                                                  const std::vector<std::vector<double>>& inputs) const = 0;
  virtual std::string kind() const = 0;
};

class RecurrentGaussianModel final : public TrainableModel {
 public:
  explicit RecurrentGaussianModel(PolicyParams params) : params_(std::move(params)) {}
  std::vector<double>& theta() override { return params_.theta; }
  const std::vector<double>& theta() const override { return params_.theta; }
  int input_dim() const override { return params_.arch().input_dim; }
  int action_dim() const override { return params_.arch().action_dim; }
  PolicyPtr snapshot() const override;
  std::unique_ptr<TreeEval> evaluate_tree(const std::vector<int>& parent,
                                          const std::vector<std::vector<double>>& inputs) const override;
  std::string kind() const override { return "recurrent"; }
  const PolicyParams& params() const { return params_; }

 private:
  PolicyParams params_;
};

// State-independent Gaussian: theta = (mu[A], log_std[A], baseline b).
class ConstantGaussianModel final : public TrainableModel {
 public:
  ConstantGaussianModel(int input_dim, std::vector<double> mu, std::vector<double> log_std, double baseline = 0.0);
  std::vector<double>& theta() override { return theta_; }
  const std::vector<double>& theta() const override { return theta_; }
  int input_dim() const override { return input_dim_; }
  int action_dim() const override { return action_dim_; }
  PolicyPtr snapshot() const override;
  std::unique_ptr<TreeEval> evaluate_tree(const std::vector<int>& parent,
                                          const std::vector<std::vector<double>>& inputs) const override;
  std::string kind() const override { return "constant"; }

 private:
  int input_dim_, action_dim_;
  std::vector<double> theta_;
};

}  // namespace qrl
