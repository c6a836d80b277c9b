#include "qrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <thread>

namespace qrl {

std::string to_string(CircuitKind k) {
  switch (k) {
    case CircuitKind::openloop_ideal: return "openloop_ideal";
    case CircuitKind::openloop_finite: return "openloop_finite";
    case CircuitKind::feedback_finite: return "feedback_finite";
    case CircuitKind::qubit_flip: return "qubit_flip";
  }
  return "unknown";
}

CircuitKind circuit_kind_from_string(const std::string& s) {
  for (auto k : {CircuitKind::openloop_ideal, CircuitKind::openloop_finite, CircuitKind::feedback_finite,
                 CircuitKind::qubit_flip}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown circuit kind '" + s + "'");
}

std::vector<double> ControlAction::pack(CircuitKind kind) const {
  if (kind == CircuitKind::qubit_flip) return {flip};
  std::vector<double> v{alpha.real(), alpha.imag()};
  v.insert(v.end(), phases.phases.begin(), phases.phases.end());
  return v;
}

ControlAction ActionMap::operator()(const std::vector<double>& raw) const {
  ControlAction a;
  if (kind == CircuitKind::qubit_flip) {
    a.flip = raw.at(0);
    return a;
  }
  if (raw.size() < 2) throw std::invalid_argument("ActionMap: raw action too short");
  const double r = std::hypot(raw[0], raw[1]);
  // tanh(r)/r -> 1 as r -> 0.
  const double g = r < 1e-8 ? 1.0 - r * r / 3.0 : std::tanh(r) / r;
  a.alpha = alpha_scale * g * cplx(raw[0], raw[1]);
  std::vector<double> ph(raw.size() - 2);
  for (std::size_t k = 0; k < ph.size(); ++k) ph[k] = kPi * std::tanh(raw[k + 2]);
  a.phases = SnapPhases(std::move(ph));
  return a;
}

FixedSequencePolicy::FixedSequencePolicy(std::vector<std::vector<double>> raw, int T) : raw_(std::move(raw)), T_(T) {
  if (static_cast<int>(raw_.size()) != T || T < 1) throw std::invalid_argument("FixedSequencePolicy: need T actions");
}

PolicyStep FixedSequencePolicy::step(const std::vector<double>& carry, const std::vector<double>&) const {
  const int t = static_cast<int>(carry.at(0));
  PolicyStep s;
  s.mean = raw_.at(t);
  s.log_std.assign(s.mean.size(), -5.0);
  s.carry = {static_cast<double>(t + 1)};
  return s;
}

void EnvConfig::validate() const {
  if (!fs) throw std::invalid_argument("EnvConfig: missing Fock space");
  if (T < 1) throw std::invalid_argument("EnvConfig: T must be >= 1");
  if (kind != CircuitKind::qubit_flip && (phi < 1 || phi > fs->dim()))
    throw std::invalid_argument("EnvConfig: Phi must lie in [1, N]");
  if (initial.size() != fs->dim()) throw std::invalid_argument("EnvConfig: initial state dimension differs from N");
  if (std::abs(initial.norm() - 1.0) > 1e-9) throw std::invalid_argument("EnvConfig: initial state not normalised");
  if (!reward) throw std::invalid_argument("EnvConfig: missing reward scheme");
  if ((kind == CircuitKind::openloop_finite || kind == CircuitKind::feedback_finite) && !(chi_tau > 0.0))
    throw std::invalid_argument("EnvConfig: chi_tau must be positive");
}

std::vector<double> policy_input(int t, int T, double prev_obs) {
  std::vector<double> v(T + 1, 0.0);
  v[t] = 1.0;
  v[T] = prev_obs;
  return v;
}

double gaussian_log_prob(const std::vector<double>& mean, const std::vector<double>& log_std,
                         const std::vector<double>& raw) {
  const double half_log_2pi = 0.5 * std::log(2.0 * kPi);
  double lp = 0.0;
  for (std::size_t d = 0; d < mean.size(); ++d) {
    const double z = (raw[d] - mean[d]) * std::exp(-log_std[d]);
    lp += -0.5 * z * z - log_std[d] - half_log_2pi;
  }
  return lp;
}

namespace {

bool branch_is_zero(const StateVector& joint, int N) {
  for (int n = 0; n < N; ++n)
    if (joint(N + n) != cplx(0.0, 0.0)) return false;
  return true;
}

// Unitary part of a step, in place.
void apply_step_unitary(StateVector& joint, const ControlAction& action, const EnvConfig& cfg) {
  const int N = cfg.N();
  switch (cfg.kind) {
    case CircuitKind::qubit_flip:
      apply_qubit(qubit_rotation(0.0, 2.0 * kPi * action.flip), joint, N);
      return;
    case CircuitKind::openloop_ideal: {
      const bool skip_e = branch_is_zero(joint, N);
      apply_displacement(*cfg.fs, action.alpha, joint, skip_e);
      apply_snap_ideal(action.phases, joint, N, skip_e);
      apply_displacement(*cfg.fs, -action.alpha, joint, skip_e);
      return;
    }
    case CircuitKind::openloop_finite:
    case CircuitKind::feedback_finite: {
      const SnapPulseModel model({cfg.chi_tau, cfg.phi}, N);
      apply_displacement(*cfg.fs, action.alpha, joint, branch_is_zero(joint, N));
      apply_level_blocks(model.level_blocks(action.phases), joint, N);
      apply_displacement(*cfg.fs, -action.alpha, joint);
      return;
    }
  }
}

double step_leak(const StateVector& joint, const EnvConfig& cfg) {
  if (cfg.kind == CircuitKind::qubit_flip) return 0.0;
  const double leak = top_population_joint(joint, cfg.N());
  if (cfg.abort_on_leak && leak > cfg.leak_max) {
    throw std::domain_error("episode: truncation leak " + std::to_string(leak) + " exceeds " +
                            std::to_string(cfg.leak_max));
  }
  return leak;
}

void check_policy(const Policy& policy, const EnvConfig& cfg) {
  if (policy.action_dim() != cfg.action_dim())
    throw std::invalid_argument("policy action dimension " + std::to_string(policy.action_dim()) +
                                " differs from circuit dimension " + std::to_string(cfg.action_dim()));
  if (policy.input_dim() != cfg.input_dim())
    throw std::invalid_argument("policy input dimension differs from T + 1");
}

double default_metric(const EnvConfig& cfg, const StateVector& joint) {
  if (cfg.branch_metric) return cfg.branch_metric(joint);
  if (cfg.target.size() != cfg.N()) throw std::invalid_argument("evaluation: no target state configured");
  return reduced_fidelity(joint, cfg.target);
}

// Synchronous rollout of rngs.size() episodes; see run_batch.
Batch rollout(const Policy& policy, const EnvConfig& cfg, std::vector<Rng>& rngs) {
  cfg.validate();
  check_policy(policy, cfg);
  const int B = static_cast<int>(rngs.size());
  const ActionMap amap = cfg.action_map();
  Batch batch;
  batch.episodes.resize(B);
  std::vector<StateVector> states(B, joint_state(0, cfg.initial));
  std::vector<int> node(B, -1);
  std::vector<int> prev_obs(B, 0);
  auto& tree = batch.tree;
  const auto root_carry = policy.initial_carry();

  for (int t = 0; t < cfg.T; ++t) {
    std::map<std::pair<int, int>, int> children;
    for (int i = 0; i < B; ++i) {
      const int obs_in = cfg.has_measurements() ? prev_obs[i] : 0;
      const auto key = std::make_pair(node[i], obs_in);
      auto it = children.find(key);
      if (it == children.end()) {
        const int parent = node[i];
        auto input = policy_input(t, cfg.T, obs_in);
        PolicyStep out = policy.step(parent < 0 ? root_carry : tree.output[parent].carry, input);
        tree.parent.push_back(parent);
        tree.depth.push_back(t);
        tree.input.push_back(std::move(input));
        tree.output.push_back(std::move(out));
        it = children.emplace(key, tree.size() - 1).first;
      }
      node[i] = it->second;
    }
    parallel_for(B, cfg.threads, [&](int i) {
      Rng& rng = rngs[i];
      const PolicyStep& out = tree.output[node[i]];
      StepRecord rec;
      rec.node = node[i];
      rec.raw = out.mean;
      if (!policy.deterministic()) {
        for (std::size_t d = 0; d < rec.raw.size(); ++d) rec.raw[d] += std::exp(out.log_std[d]) * rng.normal();
      }
      rec.log_prob = gaussian_log_prob(out.mean, out.log_std, rec.raw);
      rec.value = out.value;
      rec.action = amap(rec.raw);
      rec.observation = apply_control_step(states[i], rec.action, cfg, rng);
      auto& ep = batch.episodes[i];
      ep.max_leak = std::max(ep.max_leak, step_leak(states[i], cfg));
      if (rec.observation == -1) ep.history |= (1u << t);
      prev_obs[i] = cfg.has_measurements() ? rec.observation : 0;
      ep.steps.push_back(std::move(rec));
    });
  }
  parallel_for(B, cfg.threads, [&](int i) {
    auto& ep = batch.episodes[i];
    ep.outcome = cfg.reward->sample(states[i], rngs[i]);
    ep.reward = ep.outcome.reward;
    if (cfg.keep_final_state) ep.final_state = states[i];
  });
  return batch;
}

}  // namespace

int apply_control_step(StateVector& joint, const ControlAction& action, const EnvConfig& cfg, Rng& rng) {
  apply_step_unitary(joint, action, cfg);
  if (!cfg.has_measurements()) return +1;
  const int m = measure_qubit(joint, cfg.N(), rng);
  reset_to_ground(joint, cfg.N(), m);
  return m;
}

ComplexMatrix step_unitary(const ControlAction& action, const EnvConfig& cfg) {
  const int N = cfg.N();
  ComplexMatrix U(2 * N, 2 * N);
  for (int c = 0; c < 2 * N; ++c) {
    StateVector e = basis_state(2 * N, c);
    apply_step_unitary(e, action, cfg);
    U.col(c) = e;
  }
  return U;
}

std::pair<ComplexMatrix, ComplexMatrix> step_kraus(const ControlAction& action, const EnvConfig& cfg) {
  const int N = cfg.N();
  const ComplexMatrix U = step_unitary(action, cfg);
  // Input qubit |g>; the reset after outcome -1 maps |e> to |g> without touching the oscillator.
  return {U.topLeftCorner(N, N), U.bottomLeftCorner(N, N)};
}

EpisodeRecord run_episode(const Policy& policy, const EnvConfig& cfg, Rng& rng) {
  std::vector<Rng> rngs{rng};
  EnvConfig single = cfg;
  single.threads = 1;
  Batch b = rollout(policy, single, rngs);
  rng = rngs[0];
  return std::move(b.episodes[0]);
}

Batch run_batch(const Policy& policy, const EnvConfig& cfg, int B, std::uint64_t seed) {
  if (B < 1) throw std::invalid_argument("run_batch: B must be >= 1");
  std::vector<Rng> rngs;
  rngs.reserve(B);
  for (int i = 0; i < B; ++i) rngs.emplace_back(derive_seed(seed, static_cast<std::uint64_t>(i)));
  return rollout(policy, cfg, rngs);
}

BranchReport enumerate_branches(const Policy& policy, const EnvConfig& cfg, double prune_below) {
  cfg.validate();
  check_policy(policy, cfg);
  if (cfg.T > 12 && cfg.has_measurements()) throw std::invalid_argument("enumerate_branches: T > 12");
  const int N = cfg.N();
  const ActionMap amap = cfg.action_map();
  BranchReport report;

  struct Frame {
    StateVector state;
    double p;
    std::vector<double> carry;
    int prev_obs;
    std::uint32_t history;
    std::string bits;
    double leak;
  };
  std::vector<Frame> frontier{{joint_state(0, cfg.initial), 1.0, policy.initial_carry(), 0, 0u, "", 0.0}};
  for (int t = 0; t < cfg.T; ++t) {
    std::vector<Frame> next;
    for (auto& f : frontier) {
      const PolicyStep out = policy.step(f.carry, policy_input(t, cfg.T, cfg.has_measurements() ? f.prev_obs : 0));
      const ControlAction a = amap(out.mean);
      apply_step_unitary(f.state, a, cfg);
      if (!cfg.has_measurements()) {
        const double leak = std::max(f.leak, top_population_joint(f.state, N));
        next.push_back({std::move(f.state), f.p, out.carry, 0, f.history, f.bits + "1", leak});
        continue;
      }
      const double pg = prob_ground(f.state, N);
      const double pe = f.state.tail(N).squaredNorm();
      for (int m : {+1, -1}) {
        const double pm = m == +1 ? pg : pe;
        if (f.p * pm < prune_below) {
          report.pruned_probability += f.p * pm;
          continue;
        }
        StateVector s = f.state;
        if (m == +1) {
          s.tail(N).setZero();
        } else {
          s.head(N).setZero();
        }
        s /= std::sqrt(pm);
        reset_to_ground(s, N, m);
        const double leak = std::max(f.leak, top_population_joint(s, N));
        next.push_back({std::move(s), f.p * pm, out.carry, m, f.history | (m == -1 ? (1u << t) : 0u),
                        f.bits + (m == +1 ? "1" : "0"), leak});
      }
    }
    frontier = std::move(next);
  }
  for (auto& f : frontier) {
    BranchResult b;
    b.history = f.history;
    b.bits = f.bits;
    b.probability = f.p;
    b.metric = default_metric(cfg, f.state);
    b.final_state = std::move(f.state);
    b.leak = f.leak;
    report.weighted_metric += b.probability * b.metric;
    report.total_probability += b.probability;
    report.branches.push_back(std::move(b));
  }
  std::stable_sort(report.branches.begin(), report.branches.end(),
                   [](const BranchResult& a, const BranchResult& b) { return a.probability > b.probability; });
  return report;
}

double evaluate_policy(const Policy& policy, const EnvConfig& cfg) {
  return enumerate_branches(policy, cfg).weighted_metric;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

void parallel_for(int n, int threads, const std::function<void(int)>& f) {
  const int w = std::min(resolve_threads(threads), n);
  if (w <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  const int chunk = (n + w - 1) / w;
  for (int k = 0; k < w; ++k) {
    pool.emplace_back([&, k] {
      try {
        for (int i = k * chunk; i < std::min(n, (k + 1) * chunk); ++i) f(i);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace qrl
