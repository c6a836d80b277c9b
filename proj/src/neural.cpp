#include "qrl/neural.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace qrl {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMat = Eigen::Map<const RowMat>;
using MMat = Eigen::Map<RowMat>;
using CVec = Eigen::Map<const Eigen::VectorXd>;
using MVec = Eigen::Map<Eigen::VectorXd>;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

RecurrentNet::RecurrentNet(const NetSpec& spec, std::size_t offset) : spec_(spec), offset_(offset) {
  if (spec.input_dim < 1 || spec.lstm_units < 1 || spec.output_dim < 1)
    throw std::invalid_argument("RecurrentNet: dimensions must be positive");
  const std::size_t H = spec.lstm_units;
  std::size_t at = 0;
  auto add = [&](std::size_t rows, std::size_t cols) {
    blocks_.push_back({at, rows, cols});
    at += rows * cols;
  };
  add(4 * H, spec.input_dim);
  add(4 * H, H);
  add(4 * H, 1);
  std::size_t prev = H;
  for (int w : spec.dense) {
    if (w < 1) throw std::invalid_argument("RecurrentNet: dense width must be positive");
    add(w, prev);
    add(w, 1);
    prev = w;
  }
  add(spec.output_dim, prev);
  add(spec.output_dim, 1);
  size_ = at;
}

RecurrentNet::NodeCache RecurrentNet::forward_node(const double* theta, const std::vector<double>& carry,
                                                   const std::vector<double>& x) const {
  const int H = spec_.lstm_units;
  if (static_cast<int>(x.size()) != spec_.input_dim)
    throw std::invalid_argument("RecurrentNet: input dimension " + std::to_string(x.size()) + ", expected " +
                                std::to_string(spec_.input_dim));
  const double* p = theta + offset_;
  NodeCache nc;
  nc.x = x;
  if (carry.empty()) {
    nc.h_prev.assign(H, 0.0);
    nc.c_prev.assign(H, 0.0);
  } else {
    nc.h_prev.assign(carry.begin(), carry.begin() + H);
    nc.c_prev.assign(carry.begin() + H, carry.begin() + 2 * H);
  }
  const auto W = lstm_w(), U = lstm_u(), b = lstm_b();
  Eigen::VectorXd z = CMat(p + W.at, W.rows, W.cols) * CVec(nc.x.data(), spec_.input_dim) +
                      CMat(p + U.at, U.rows, U.cols) * CVec(nc.h_prev.data(), H) + CVec(p + b.at, 4 * H);
  nc.gates.resize(4 * H);
  nc.c.resize(H);
  nc.tanh_c.resize(H);
  nc.h.resize(H);
  for (int j = 0; j < H; ++j) {
    const double i = sigmoid(z(j)), f = sigmoid(z(H + j)), g = std::tanh(z(2 * H + j)), o = sigmoid(z(3 * H + j));
    nc.gates[j] = i;
    nc.gates[H + j] = f;
    nc.gates[2 * H + j] = g;
    nc.gates[3 * H + j] = o;
    nc.c[j] = f * nc.c_prev[j] + i * g;
    nc.tanh_c[j] = std::tanh(nc.c[j]);
    nc.h[j] = o * nc.tanh_c[j];
  }
  const std::vector<double>* a = &nc.h;
  for (std::size_t l = 0; l < spec_.dense.size(); ++l) {
    const auto Wl = dense_w(l), bl = dense_b(l);
    Eigen::VectorXd y = CMat(p + Wl.at, Wl.rows, Wl.cols) * CVec(a->data(), a->size()) + CVec(p + bl.at, Wl.rows);
    nc.act.emplace_back(Wl.rows);
    for (std::size_t j = 0; j < Wl.rows; ++j) nc.act.back()[j] = std::tanh(y(j));
    a = &nc.act.back();
  }
  const auto Wo = out_w(), bo = out_b();
  Eigen::VectorXd out = CMat(p + Wo.at, Wo.rows, Wo.cols) * CVec(a->data(), a->size()) + CVec(p + bo.at, Wo.rows);
  nc.out.assign(out.data(), out.data() + out.size());
  return nc;
}

std::vector<RecurrentNet::NodeCache> RecurrentNet::forward_tree(const double* theta, const std::vector<int>& parent,
                                                                const std::vector<std::vector<double>>& inputs) const {
  std::vector<NodeCache> cache;
  cache.reserve(parent.size());
  const int H = spec_.lstm_units;
  for (std::size_t k = 0; k < parent.size(); ++k) {
    if (parent[k] >= static_cast<int>(k)) throw std::invalid_argument("forward_tree: parent after child");
    std::vector<double> carry;
    if (parent[k] >= 0) {
      const auto& pc = cache[parent[k]];
      carry.reserve(2 * H);
      carry.insert(carry.end(), pc.h.begin(), pc.h.end());
      carry.insert(carry.end(), pc.c.begin(), pc.c.end());
    }
    cache.push_back(forward_node(theta, carry, inputs[k]));
  }
  return cache;
}

void RecurrentNet::backward_tree(const double* theta, const std::vector<int>& parent,
                                 const std::vector<NodeCache>& cache, const std::vector<std::vector<double>>& d_out,
                                 double* grad) const {
  const int H = spec_.lstm_units;
  const int n = static_cast<int>(cache.size());
  const double* p = theta + offset_;
  double* g = grad + offset_;
  std::vector<Eigen::VectorXd> dh(n, Eigen::VectorXd::Zero(H)), dc(n, Eigen::VectorXd::Zero(H));
  const auto W = lstm_w(), U = lstm_u(), b = lstm_b();
  const auto Wo = out_w(), bo = out_b();
  for (int k = n - 1; k >= 0; --k) {
    const NodeCache& nc = cache[k];
    Eigen::VectorXd dh_total = dh[k];
    if (!d_out[k].empty()) {
      const std::vector<double>& a_last = nc.act.empty() ? nc.h : nc.act.back();
      const CVec dout(d_out[k].data(), Wo.rows);
      MMat(g + Wo.at, Wo.rows, Wo.cols).noalias() += dout * CVec(a_last.data(), a_last.size()).transpose();
      MVec(g + bo.at, Wo.rows) += dout;
      Eigen::VectorXd da = CMat(p + Wo.at, Wo.rows, Wo.cols).transpose() * dout;
      for (int l = static_cast<int>(spec_.dense.size()) - 1; l >= 0; --l) {
        const auto Wl = dense_w(l), bl = dense_b(l);
        const std::vector<double>& y = nc.act[l];
        const std::vector<double>& a_in = l == 0 ? nc.h : nc.act[l - 1];
        Eigen::VectorXd dpre(Wl.rows);
        for (std::size_t j = 0; j < Wl.rows; ++j) dpre(j) = da(j) * (1.0 - y[j] * y[j]);
        MMat(g + Wl.at, Wl.rows, Wl.cols).noalias() += dpre * CVec(a_in.data(), a_in.size()).transpose();
        MVec(g + bl.at, Wl.rows) += dpre;
        da = CMat(p + Wl.at, Wl.rows, Wl.cols).transpose() * dpre;
      }
      dh_total += da;
    }
    Eigen::VectorXd dz(4 * H);
    Eigen::VectorXd dc_prev(H);
    for (int j = 0; j < H; ++j) {
      const double i = nc.gates[j], f = nc.gates[H + j], gg = nc.gates[2 * H + j], o = nc.gates[3 * H + j];
      const double tc = nc.tanh_c[j];
      const double d_o = dh_total(j) * tc;
      const double dct = dc[k](j) + dh_total(j) * o * (1.0 - tc * tc);
      dz(j) = dct * gg * i * (1.0 - i);
      dz(H + j) = dct * nc.c_prev[j] * f * (1.0 - f);
      dz(2 * H + j) = dct * i * (1.0 - gg * gg);
      dz(3 * H + j) = d_o * o * (1.0 - o);
      dc_prev(j) = dct * f;
    }
    MMat(g + W.at, W.rows, W.cols).noalias() += dz * CVec(nc.x.data(), nc.x.size()).transpose();
    MMat(g + U.at, U.rows, U.cols).noalias() += dz * CVec(nc.h_prev.data(), H).transpose();
    MVec(g + b.at, 4 * H) += dz;
    if (parent[k] >= 0) {
      dh[parent[k]].noalias() += CMat(p + U.at, U.rows, U.cols).transpose() * dz;
      dc[parent[k]] += dc_prev;
    }
  }
}

// ---- parameters ----

namespace {

void lecun_uniform(double* w, std::size_t rows, std::size_t cols, double gain, std::mt19937_64& eng) {
  const double lim = gain * std::sqrt(3.0 / static_cast<double>(cols));
  std::uniform_real_distribution<double> u(-lim, lim);
  for (std::size_t i = 0; i < rows * cols; ++i) w[i] = u(eng);
}

// Orthonormal columns, as for a recurrent kernel.
void orthogonal(double* w, std::size_t rows, std::size_t cols, std::mt19937_64& eng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd a(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) a(i, j) = nd(eng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  // Fix column signs so the factorisation is unique.
  const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (std::size_t j = 0; j < cols; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  MMat(w, rows, cols) = q;
}

void init_trunk(const RecurrentNet& net, std::vector<double>& theta, std::mt19937_64& eng) {
  double* p = theta.data() + net.offset();
  lecun_uniform(p + net.lstm_w().at, net.lstm_w().rows, net.lstm_w().cols, 1.0, eng);
  orthogonal(p + net.lstm_u().at, net.lstm_u().rows, net.lstm_u().cols, eng);
  for (std::size_t l = 0; l < net.spec().dense.size(); ++l)
    lecun_uniform(p + net.dense_w(l).at, net.dense_w(l).rows, net.dense_w(l).cols, 1.0, eng);
}

}  // namespace

PolicyParams::PolicyParams(const PolicyArch& arch, std::uint64_t seed) : arch_(arch) {
  if (arch.action_dim < 1 || arch.input_dim < 1) throw std::invalid_argument("PolicyParams: bad dimensions");
  if (!(arch.init_std > 0.0)) throw std::invalid_argument("PolicyParams: init_std must be positive");
  pnet_ = RecurrentNet({arch.input_dim, arch.lstm_units, arch.dense, 2 * arch.action_dim}, 0);
  vnet_ = RecurrentNet({arch.input_dim, arch.lstm_units, arch.dense, 1}, pnet_.size());
  theta.assign(pnet_.size() + vnet_.size(), 0.0);
  std::mt19937_64 eng(seed);
  init_trunk(pnet_, theta, eng);
  init_trunk(vnet_, theta, eng);
  // Mean rows: small uniform; log-std rows: zero kernel, bias ln(init_std). Value head stays zero.
  const auto Wo = pnet_.out_w(), bo = pnet_.out_b();
  const int A = arch.action_dim;
  lecun_uniform(theta.data() + Wo.at, A, Wo.cols, 0.1, eng);
  for (int d = 0; d < A; ++d) theta[bo.at + A + d] = std::log(arch.init_std);
}

std::vector<ForwardStep> forward(const PolicyParams& params, const std::vector<std::vector<double>>& inputs) {
  std::vector<int> parent(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) parent[k] = static_cast<int>(k) - 1;
  const auto pc = params.policy_net().forward_tree(params.theta.data(), parent, inputs);
  const auto vc = params.value_net().forward_tree(params.theta.data(), parent, inputs);
  const int A = params.arch().action_dim;
  std::vector<ForwardStep> out(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    out[k].mean.assign(pc[k].out.begin(), pc[k].out.begin() + A);
    out[k].log_std.resize(A);
    for (int d = 0; d < A; ++d) out[k].log_std[d] = clamp_log_std(pc[k].out[A + d]);
    out[k].value = vc[k].out[0];
  }
  return out;
}

std::vector<double> NetworkPolicy::initial_carry() const {
  return std::vector<double>(params_.policy_net().carry_size() + params_.value_net().carry_size(), 0.0);
}

PolicyStep NetworkPolicy::step(const std::vector<double>& carry, const std::vector<double>& input) const {
  const auto& pn = params_.policy_net();
  const auto& vn = params_.value_net();
  const std::size_t cp = pn.carry_size();
  const std::vector<double> pcarry(carry.begin(), carry.begin() + cp);
  const std::vector<double> vcarry(carry.begin() + cp, carry.end());
  const auto pc = pn.forward_node(params_.theta.data(), pcarry, input);
  const auto vc = vn.forward_node(params_.theta.data(), vcarry, input);
  const int A = params_.arch().action_dim;
  PolicyStep s;
  s.mean.assign(pc.out.begin(), pc.out.begin() + A);
  s.log_std.resize(A);
  for (int d = 0; d < A; ++d) s.log_std[d] = clamp_log_std(pc.out[A + d]);
  s.value = vc.out[0];
  s.carry.reserve(carry.size());
  s.carry.insert(s.carry.end(), pc.h.begin(), pc.h.end());
  s.carry.insert(s.carry.end(), pc.c.begin(), pc.c.end());
  s.carry.insert(s.carry.end(), vc.h.begin(), vc.h.end());
  s.carry.insert(s.carry.end(), vc.c.begin(), vc.c.end());
  return s;
}

double log_prob(const std::vector<double>& mean, const std::vector<double>& log_std, const std::vector<double>& raw) {
  return gaussian_log_prob(mean, log_std, raw);
}

void log_prob_grad(const std::vector<double>& mean, const std::vector<double>& log_std,
                   const std::vector<double>& raw, std::vector<double>& d_mean, std::vector<double>& d_log_std) {
  d_mean.resize(mean.size());
  d_log_std.resize(mean.size());
  for (std::size_t d = 0; d < mean.size(); ++d) {
    const double inv = std::exp(-log_std[d]);
    const double z = (raw[d] - mean[d]) * inv;
    d_mean[d] = z * inv;
    d_log_std[d] = z * z - 1.0;
  }
}

// ---- optimisation ----

double LrSchedule::at(int epoch) const {
  if (points.empty()) throw std::invalid_argument("LrSchedule: empty");
  double lr = points.front().second;
  for (const auto& [e, v] : points)
    if (e <= epoch) lr = v;
  return lr;
}

double adam_step(std::vector<double>& theta, const std::vector<double>& grad, AdamState& state, double lr,
                 double clip_norm) {
  if (grad.size() != theta.size() || state.m.size() != theta.size() || state.v.size() != theta.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw std::domain_error("adam_step: non-finite gradient at index " + std::to_string(i));
    }
    sq += grad[i] * grad[i];
  }
  const double norm = std::sqrt(sq);
  const double scale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
  state.step += 1;
  const double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i] * scale;
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double mhat = state.m[i] / b1t, vhat = state.v[i] / b2t;
    theta[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
  for (double t : theta)
    if (!std::isfinite(t)) throw std::domain_error("adam_step: non-finite weights after update");
  return norm;
}

// ---- trainable models ----

namespace {

class RecurrentTreeEval final : public TreeEval {
 public:
  RecurrentTreeEval(const PolicyParams& params, const std::vector<int>& parent,
                    const std::vector<std::vector<double>>& inputs)
      : params_(params), parent_(parent) {
    pc_ = params.policy_net().forward_tree(params.theta.data(), parent, inputs);
    vc_ = params.value_net().forward_tree(params.theta.data(), parent, inputs);
    const int A = params.arch().action_dim;
    const std::size_t n = parent.size();
    mean.resize(n);
    log_std.resize(n);
    log_std_active.resize(n);
    value.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      mean[k].assign(pc_[k].out.begin(), pc_[k].out.begin() + A);
      log_std[k].resize(A);
      log_std_active[k].resize(A);
      for (int d = 0; d < A; ++d) {
        const double raw = pc_[k].out[A + d];
        log_std[k][d] = clamp_log_std(raw);
        log_std_active[k][d] = raw > kLogStdMin && raw < kLogStdMax;
      }
      value[k] = vc_[k].out[0];
    }
  }

  void backward(const std::vector<std::vector<double>>& d_mean, const std::vector<std::vector<double>>& d_log_std,
                const std::vector<double>& d_value, std::vector<double>& grad) const override {
    const int A = params_.arch().action_dim;
    const std::size_t n = parent_.size();
    std::vector<std::vector<double>> dp(n), dv(n);
    bool any_v = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (!d_mean[k].empty() || !d_log_std[k].empty()) {
        dp[k].assign(2 * A, 0.0);
        for (int d = 0; d < A && !d_mean[k].empty(); ++d) dp[k][d] = d_mean[k][d];
        for (int d = 0; d < A && !d_log_std[k].empty(); ++d)
          dp[k][A + d] = log_std_active[k][d] ? d_log_std[k][d] : 0.0;
      }
      if (!d_value.empty() && d_value[k] != 0.0) {
        dv[k] = {d_value[k]};
        any_v = true;
      }
    }
    params_.policy_net().backward_tree(params_.theta.data(), parent_, pc_, dp, grad.data());
    if (any_v) params_.value_net().backward_tree(params_.theta.data(), parent_, vc_, dv, grad.data());
  }

 private:
  const PolicyParams& params_;
  std::vector<int> parent_;
  std::vector<RecurrentNet::NodeCache> pc_, vc_;
};

class ConstantGaussianPolicy final : public Policy {
 public:
  ConstantGaussianPolicy(int input_dim, std::vector<double> theta) : input_dim_(input_dim), theta_(std::move(theta)) {}
  int input_dim() const override { return input_dim_; }
  int action_dim() const override { return static_cast<int>((theta_.size() - 1) / 2); }
  std::vector<double> initial_carry() const override { return {}; }
  PolicyStep step(const std::vector<double>&, const std::vector<double>&) const override {
    const int A = action_dim();
    PolicyStep s;
    s.mean.assign(theta_.begin(), theta_.begin() + A);
    s.log_std.resize(A);
    for (int d = 0; d < A; ++d) s.log_std[d] = clamp_log_std(theta_[A + d]);
    s.value = theta_[2 * A];
    return s;
  }

 private:
  int input_dim_;
  std::vector<double> theta_;
};

class ConstantTreeEval final : public TreeEval {
 public:
  ConstantTreeEval(int A, std::size_t n, const std::vector<double>& theta) : A_(A) {
    std::vector<double> mu(theta.begin(), theta.begin() + A), ls(A);
    std::vector<char> active(A);
    for (int d = 0; d < A; ++d) {
      ls[d] = clamp_log_std(theta[A + d]);
      active[d] = theta[A + d] > kLogStdMin && theta[A + d] < kLogStdMax;
    }
    mean.assign(n, mu);
    log_std.assign(n, ls);
    log_std_active.assign(n, active);
    value.assign(n, theta[2 * A]);
  }

  void backward(const std::vector<std::vector<double>>& d_mean, const std::vector<std::vector<double>>& d_log_std,
                const std::vector<double>& d_value, std::vector<double>& grad) const override {
    for (std::size_t k = 0; k < mean.size(); ++k) {
      for (int d = 0; d < A_ && !d_mean[k].empty(); ++d) grad[d] += d_mean[k][d];
      for (int d = 0; d < A_ && !d_log_std[k].empty(); ++d)
        if (log_std_active[k][d]) grad[A_ + d] += d_log_std[k][d];
      if (!d_value.empty()) grad[2 * A_] += d_value[k];
    }
  }

 private:
  int A_;
};

}  // namespace

PolicyPtr RecurrentGaussianModel::snapshot() const { return std::make_shared<NetworkPolicy>(params_); }

std::unique_ptr<TreeEval> RecurrentGaussianModel::evaluate_tree(const std::vector<int>& parent,
                                                                const std::vector<std::vector<double>>& inputs) const {
  return std::make_unique<RecurrentTreeEval>(params_, parent, inputs);
}

ConstantGaussianModel::ConstantGaussianModel(int input_dim, std::vector<double> mu, std::vector<double> log_std,
                                             double baseline)
    : input_dim_(input_dim), action_dim_(static_cast<int>(mu.size())) {
  if (mu.empty() || mu.size() != log_std.size())
    throw std::invalid_argument("ConstantGaussianModel: mu and log_std must have equal, nonzero length");
  theta_ = mu;
  theta_.insert(theta_.end(), log_std.begin(), log_std.end());
  theta_.push_back(baseline);
}

PolicyPtr ConstantGaussianModel::snapshot() const {
  return std::make_shared<ConstantGaussianPolicy>(input_dim_, theta_);
}

std::unique_ptr<TreeEval> ConstantGaussianModel::evaluate_tree(const std::vector<int>& parent,
                                                               const std::vector<std::vector<double>>&) const {
  return std::make_unique<ConstantTreeEval>(action_dim_, parent.size(), theta_);
}

}  // namespace qrl
