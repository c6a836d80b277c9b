#include "doctest.h"

#include "qrl/env.hpp"
#include "qrl/rewards.hpp"
#include "qrl/targets.hpp"

#include <cmath>
#include <map>
#include <random>

using namespace qrl;

namespace {

// Gaussian policy with a fixed mean per step and a shared log-std; ignores observations.
class StepGaussian final : public Policy {
 public:
  StepGaussian(std::vector<std::vector<double>> means, double log_std, int T)
      : means_(std::move(means)), log_std_(log_std), T_(T) {}
  int input_dim() const override { return T_ + 1; }
  int action_dim() const override { return static_cast<int>(means_.front().size()); }
  std::vector<double> initial_carry() const override { return {0.0}; }
  PolicyStep step(const std::vector<double>& carry, const std::vector<double>&) const override {
    const int t = static_cast<int>(carry[0]);
    PolicyStep s;
    s.mean = means_[t];
    s.log_std.assign(s.mean.size(), log_std_);
    s.carry = {carry[0] + 1.0};
    return s;
  }

 private:
  std::vector<std::vector<double>> means_;
  double log_std_;
  int T_;
};

// Observation-dependent deterministic policy: the action after outcome -1 differs.
class BranchingPolicy final : public Policy {
 public:
  BranchingPolicy(std::vector<double> on_plus, std::vector<double> on_minus, int T)
      : plus_(std::move(on_plus)), minus_(std::move(on_minus)), T_(T) {}
  int input_dim() const override { return T_ + 1; }
  int action_dim() const override { return static_cast<int>(plus_.size()); }
  std::vector<double> initial_carry() const override { return {}; }
  PolicyStep step(const std::vector<double>&, const std::vector<double>& input) const override {
    PolicyStep s;
    s.mean = input.back() < 0.0 ? minus_ : plus_;
    s.log_std.assign(s.mean.size(), -5.0);
    return s;
  }
  bool deterministic() const override { return true; }

 private:
  std::vector<double> plus_, minus_;
  int T_;
};

std::vector<double> random_raw(int dim, std::mt19937_64& rng, double scale = 0.6) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(dim);
  for (double& x : v) x = g(rng);
  return v;
}

EnvConfig small_env(CircuitKind kind, int N = 20, int T = 3, int phi = 5) {
  EnvConfig cfg;
  cfg.fs = build_fock_space(N);
  cfg.T = T;
  cfg.phi = phi;
  cfg.kind = kind;
  cfg.chi_tau = 0.4;
  cfg.initial = basis_state(N, 0);
  cfg.target = basis_state(N, 1);
  cfg.reward = make_fock_reward(cfg.fs, 1);
  cfg.alpha_scale = 1.0;
  cfg.threads = 1;
  return cfg;
}

bool same_episode(const EpisodeRecord& a, const EpisodeRecord& b) {
  if (a.steps.size() != b.steps.size() || a.reward != b.reward || a.history != b.history) return false;
  for (std::size_t t = 0; t < a.steps.size(); ++t) {
    const auto &x = a.steps[t], &y = b.steps[t];
    if (x.raw != y.raw || x.observation != y.observation || x.log_prob != y.log_prob || x.value != y.value) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("Born-rule measurement") {
  Rng rng(1);
  const StateVector g0 = joint_state(0, basis_state(3, 0));
  for (int i = 0; i < 100; ++i) {
    const auto [m, s] = born_measure(g0, 3, rng);
    CHECK(m == +1);
    CHECK(max_abs(s - g0) == 0.0);
  }
  StateVector plus = StateVector::Zero(6);
  plus(0) = plus(3) = 1.0 / std::sqrt(2.0);
  int ground = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) ground += born_measure(plus, 3, rng).first == +1;
  CHECK(std::abs(ground / double(n) - 0.5) < 3.0 * 0.5 / std::sqrt(double(n)));
  StateVector bad = plus * 2.0;
  CHECK_THROWS_AS(measure_qubit(bad, 3, rng), std::domain_error);
}

TEST_CASE("action map and parameter counts") {
  ActionMap m{CircuitKind::openloop_ideal, 2.0};
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const ControlAction a = m(random_raw(17, rng, 5.0));
    CHECK(std::abs(a.alpha) < 2.0);
    for (double p : a.phases.phases) CHECK((p > -kPi && p <= kPi));
    CHECK(a.pack(CircuitKind::openloop_ideal).size() == 17);
  }
  CHECK(std::abs(m(std::vector<double>(17, 0.0)).alpha) == 0.0);

  EnvConfig fock = small_env(CircuitKind::openloop_ideal, 20, 5, 15);
  CHECK(fock.T * fock.action_dim() == 85);
  EnvConfig gkp = small_env(CircuitKind::openloop_ideal, 40, 9, 30);
  CHECK(gkp.T * gkp.action_dim() == 288);
}

TEST_CASE("policy input encoding") {
  const auto v = policy_input(2, 5, -1.0);
  REQUIRE(v.size() == 6);
  for (int k = 0; k < 5; ++k) CHECK(v[k] == (k == 2 ? 1.0 : 0.0));
  CHECK(v[5] == -1.0);
}

TEST_CASE("control step") {
  SUBCASE("identity action leaves the state alone") {
    EnvConfig cfg = small_env(CircuitKind::openloop_ideal);
    StateVector s = joint_state(0, basis_state(20, 2));
    const StateVector before = s;
    ControlAction a;
    a.phases = SnapPhases(std::vector<double>(5, 0.0));
    Rng rng(3);
    CHECK(apply_control_step(s, a, cfg, rng) == +1);
    CHECK(max_abs(s - before) < 1e-12);
  }
  SUBCASE("selective pulses keep the qubit in the ground state") {
    EnvConfig cfg = small_env(CircuitKind::feedback_finite);
    cfg.chi_tau = 100.0;
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 5; ++trial) {
      const ControlAction a = cfg.action_map()(random_raw(7, rng));
      const auto [kp, km] = step_kraus(a, cfg);
      const double p_plus = (kp * basis_state(20, 0)).squaredNorm();
      CHECK(p_plus > 0.999);
      CHECK((km * basis_state(20, 0)).squaredNorm() == doctest::Approx(1.0 - p_plus));
    }
  }
  SUBCASE("Kraus completeness") {
    std::mt19937_64 rng(5);
    for (double chi_tau : {0.4, 3.4}) {
      EnvConfig cfg = small_env(CircuitKind::feedback_finite, 30, 3, 7);
      cfg.chi_tau = chi_tau;
      for (int trial = 0; trial < 5; ++trial) {
        const ControlAction a = cfg.action_map()(random_raw(9, rng));
        const auto [kp, km] = step_kraus(a, cfg);
        const ComplexMatrix sum = kp.adjoint() * kp + km.adjoint() * km;
        const int g = guarded_block(30, std::abs(a.alpha));
        CHECK(max_abs(sum.topLeftCorner(g, g) - identity(g)) < 1e-8);
      }
    }
  }
}

TEST_CASE("episodes are reproducible") {
  EnvConfig cfg = small_env(CircuitKind::feedback_finite);
  std::mt19937_64 rng(6);
  std::vector<std::vector<double>> means;
  for (int t = 0; t < 3; ++t) means.push_back(random_raw(7, rng));
  StepGaussian pol(means, std::log(0.3), 3);

  Rng a(11), b(11);
  CHECK(same_episode(run_episode(pol, cfg, a), run_episode(pol, cfg, b)));

  const Batch b1 = run_batch(pol, cfg, 64, 99);
  const Batch b2 = run_batch(pol, cfg, 64, 99);
  EnvConfig threaded = cfg;
  threaded.threads = 4;
  const Batch b3 = run_batch(pol, threaded, 64, 99);
  for (int i = 0; i < 64; ++i) {
    CHECK(same_episode(b1.episodes[i], b2.episodes[i]));
    CHECK(same_episode(b1.episodes[i], b3.episodes[i]));
  }
  // Episode i of a batch uses the derived stream i.
  Rng r5(derive_seed(99, 5));
  CHECK(same_episode(run_episode(pol, cfg, r5), b1.episodes[5]));
}

TEST_CASE("batch shape") {
  EnvConfig cfg = small_env(CircuitKind::openloop_ideal, 20, 5, 15);
  std::vector<std::vector<double>> means(5, std::vector<double>(17, 0.1));
  StepGaussian pol(means, std::log(0.3), 5);
  const Batch b = run_batch(pol, cfg, 1000, 1);
  REQUIRE(b.episodes.size() == 1000);
  for (const auto& ep : b.episodes) {
    CHECK(ep.steps.size() == 5);
    CHECK((ep.reward == 1.0 || ep.reward == -1.0));
  }
  // Open loop: one history node per depth.
  CHECK(b.tree.size() == 5);
}

TEST_CASE("history tree deduplicates observation prefixes") {
  EnvConfig cfg = small_env(CircuitKind::feedback_finite, 20, 4, 5);
  std::mt19937_64 rng(7);
  std::vector<std::vector<double>> means;
  for (int t = 0; t < 4; ++t) means.push_back(random_raw(7, rng, 1.0));
  StepGaussian pol(means, std::log(0.3), 4);
  const Batch b = run_batch(pol, cfg, 200, 3);
  CHECK(b.tree.size() <= 1 + 2 + 4 + 8);
  for (const auto& ep : b.episodes) {
    int parent = -1;
    for (std::size_t t = 0; t < ep.steps.size(); ++t) {
      const int node = ep.steps[t].node;
      CHECK(b.tree.parent[node] == parent);
      CHECK(b.tree.depth[node] == static_cast<int>(t));
      parent = node;
    }
  }
}

TEST_CASE("branch enumeration") {
  SUBCASE("ideal circuit has one branch") {
    EnvConfig cfg = small_env(CircuitKind::openloop_ideal, 20, 5, 5);
    std::mt19937_64 rng(8);
    std::vector<std::vector<double>> raw;
    for (int t = 0; t < 5; ++t) raw.push_back(random_raw(7, rng));
    const BranchReport r = enumerate_branches(FixedSequencePolicy(raw, 5), cfg);
    REQUIRE(r.branches.size() == 1);
    CHECK(r.branches[0].bits == "11111");
    CHECK(r.branches[0].probability == doctest::Approx(1.0));
  }
  SUBCASE("finite pulses branch and conserve probability") {
    EnvConfig cfg = small_env(CircuitKind::feedback_finite, 20, 4, 5);
    std::mt19937_64 rng(9);
    BranchingPolicy pol(random_raw(7, rng, 1.0), random_raw(7, rng, 1.0), 4);
    const BranchReport r = enumerate_branches(pol, cfg, 0.0);
    CHECK(r.branches.size() > 1);
    CHECK(std::abs(r.total_probability - 1.0) < 1e-9);
    for (std::size_t i = 1; i < r.branches.size(); ++i)
      CHECK(r.branches[i - 1].probability >= r.branches[i].probability);
  }
}

TEST_CASE("sampled rewards match the exact branch computation") {
  EnvConfig cfg = small_env(CircuitKind::feedback_finite, 20, 3, 5);
  std::mt19937_64 rng(10);
  BranchingPolicy pol(random_raw(7, rng, 0.8), random_raw(7, rng, 0.8), 3);
  const BranchReport r = enumerate_branches(pol, cfg, 0.0);
  double exact = 0.0;
  for (const auto& b : r.branches) exact += b.probability * cfg.reward->expected(b.final_state);

  const int B = 100000;
  const Batch batch = run_batch(pol, cfg, B, 12);
  double s = 0.0, s2 = 0.0;
  for (const auto& ep : batch.episodes) {
    s += ep.reward;
    s2 += ep.reward * ep.reward;
  }
  const double mean = s / B, sem = std::sqrt((s2 / B - mean * mean) / B);
  CHECK(std::abs(mean - exact) < 3.0 * sem);

  // Empirical history frequencies against branch probabilities.
  std::map<std::uint32_t, int> counts;
  for (const auto& ep : batch.episodes) ++counts[ep.history];
  for (const auto& b : r.branches) {
    const double p = b.probability;
    CHECK(std::abs(counts[b.history] / double(B) - p) < 4.0 * std::sqrt(p * (1 - p) / B) + 1e-12);
  }
}

TEST_CASE("states stay normalised") {
  EnvConfig cfg = small_env(CircuitKind::feedback_finite, 30, 5, 7);
  cfg.keep_final_state = true;
  cfg.alpha_scale = 1.5;
  std::mt19937_64 rng(13);
  std::vector<std::vector<double>> means;
  for (int t = 0; t < 5; ++t) means.push_back(random_raw(9, rng));
  StepGaussian pol(means, 0.0, 5);
  const Batch b = run_batch(pol, cfg, 2000, 4);
  double worst = 0.0;
  for (const auto& ep : b.episodes) worst = std::max(worst, std::abs(ep.final_state->norm() - 1.0));
  CHECK(worst < 1e-8);
}

TEST_CASE("evaluation reference points") {
  SUBCASE("random open-loop policies rarely prepare Fock 1") {
    EnvConfig cfg = small_env(CircuitKind::openloop_ideal, 40, 5, 15);
    cfg.alpha_scale = 2.0;
    std::mt19937_64 rng(14);
    int low = 0;
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<std::vector<double>> raw;
      for (int t = 0; t < 5; ++t) raw.push_back(random_raw(17, rng, 0.3));
      low += evaluate_policy(FixedSequencePolicy(raw, 5), cfg) < 0.5;
    }
    CHECK(low >= 8);
  }
  SUBCASE("qubit flip at a = 1/2") {
    EnvConfig cfg;
    cfg.fs = build_fock_space(2);
    cfg.T = 1;
    cfg.phi = 1;
    cfg.kind = CircuitKind::qubit_flip;
    cfg.initial = basis_state(2, 0);
    cfg.target = basis_state(2, 0);
    cfg.reward = make_qubit_excitation_reward(2);
    cfg.branch_metric = [](const StateVector& s) { return 1.0 - prob_ground(s, 2); };
    cfg.threads = 1;
    const BranchReport r = enumerate_branches(FixedSequencePolicy({{0.5}}, 1), cfg);
    CHECK(r.weighted_metric == doctest::Approx(1.0));
    Rng rng(1);
    for (int i = 0; i < 50; ++i) CHECK(run_episode(FixedSequencePolicy({{0.5}}, 1), cfg, rng).reward == 1.0);
  }
}

TEST_CASE("configuration validation") {
  EnvConfig cfg = small_env(CircuitKind::openloop_ideal);
  cfg.phi = 50;
  CHECK_THROWS(cfg.validate());
  EnvConfig ok = small_env(CircuitKind::openloop_ideal);
  CHECK_NOTHROW(ok.validate());
}
