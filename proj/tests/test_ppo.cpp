#include "doctest.h"

#include "qrl/ppo.hpp"
#include "qrl/registry.hpp"
#include "qrl/rewards.hpp"
#include "qrl/runner.hpp"
#include "qrl/targets.hpp"

#include "json.hpp"

#include <cmath>
#include <random>

using namespace qrl;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-4, std::abs(a) + std::abs(b)); }

EnvConfig toy_env(CircuitKind kind, int T = 3) {
  EnvConfig cfg;
  cfg.fs = build_fock_space(12);
  cfg.T = T;
  cfg.phi = 3;
  cfg.kind = kind;
  cfg.chi_tau = 0.4;
  cfg.initial = basis_state(12, 0);
  cfg.target = basis_state(12, 1);
  cfg.reward = make_fock_reward(cfg.fs, 1);
  cfg.alpha_scale = 1.0;
  cfg.threads = 1;
  return cfg;
}

RecurrentGaussianModel toy_model(const EnvConfig& env, std::uint64_t seed) {
  PolicyArch arch{env.input_dim(), env.action_dim(), 4, {6}, 0.3};
  PolicyParams p(arch, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  // Non-zero value head so advantages differ from returns.
  for (double& w : p.theta) w += g(rng);
  return RecurrentGaussianModel(p);
}

// Zero-reward scheme used to check that a flat landscape gives no update.
class ZeroReward final : public RewardScheme {
 public:
  RewardOutcome sample(const StateVector&, Rng&) const override { return {}; }
  double expected(const StateVector&) const override { return 0.0; }
  std::string name() const override { return "zero"; }
};

Batch one_step_batch(const std::vector<double>& raw, double log_prob, double value, double reward) {
  Batch b;
  b.tree.parent = {-1};
  b.tree.depth = {0};
  b.tree.input = {policy_input(0, 1, 0.0)};
  b.tree.output.resize(1);
  EpisodeRecord ep;
  StepRecord s;
  s.raw = raw;
  s.log_prob = log_prob;
  s.value = value;
  s.node = 0;
  ep.steps.push_back(s);
  ep.reward = reward;
  b.episodes.push_back(ep);
  return b;
}

}  // namespace

TEST_CASE("returns and advantages") {
  auto mk = [](std::vector<double> values, double R) {
    Batch b;
    EpisodeRecord ep;
    for (double v : values) {
      StepRecord s;
      s.value = v;
      ep.steps.push_back(s);
    }
    ep.reward = R;
    b.episodes.push_back(ep);
    return b;
  };
  SUBCASE("zero baseline") {
    const auto tb = compute_advantages(mk({0, 0, 0}, 1.0), 1.0);
    for (double a : tb.advantages[0]) CHECK(a == 1.0);
    for (double r : tb.returns[0]) CHECK(r == 1.0);
  }
  SUBCASE("perfect baseline") {
    const auto tb = compute_advantages(mk({-1, -1, -1, -1}, -1.0), 1.0);
    for (double a : tb.advantages[0]) CHECK(a == 0.0);
  }
  SUBCASE("discounting") {
    const auto tb = compute_advantages(mk({0, 0, 0}, 2.0), 0.5);
    CHECK(tb.returns[0][2] == 2.0);
    CHECK(tb.returns[0][1] == 1.0);
    CHECK(tb.returns[0][0] == 0.5);
  }
  SUBCASE("normalisation") {
    Batch b = mk({0, 0}, 1.0);
    b.episodes.push_back(mk({0, 0}, -1.0).episodes[0]);
    const auto tb = compute_advantages(b, 1.0, true);
    double s = 0.0, s2 = 0.0;
    for (const auto& row : tb.advantages)
      for (double a : row) {
        s += a;
        s2 += a * a;
      }
    CHECK(std::abs(s) < 1e-12);
    CHECK(s2 / 4.0 == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("loss gradient matches finite differences") {
  for (CircuitKind kind : {CircuitKind::openloop_ideal, CircuitKind::feedback_finite}) {
    const EnvConfig env = toy_env(kind);
    RecurrentGaussianModel model = toy_model(env, 3);
    const Batch batch = run_batch(*model.snapshot(), env, 16, 11);
    const TrainBatch tb = compute_advantages(batch, 1.0);
    // Move away from the rollout parameters so the ratios are not all 1.
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 0.005);
    for (double& w : model.theta()) w += g(rng);
    PpoConfig cfg;
    cfg.lr.points = {{0, 1e-3}};
    cfg.entropy_coef = 0.01;
    std::vector<double> grad;
    const LossTerms lt = ppo_loss(tb, model, cfg, &grad);
    CHECK(lt.clip_fraction < 0.5);
    const auto theta = model.theta();
    double worst = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      auto& th = model.theta();
      th[i] = theta[i] + 1e-6;
      const double lp = ppo_loss(tb, model, cfg).loss;
      th[i] = theta[i] - 1e-6;
      const double lm = ppo_loss(tb, model, cfg).loss;
      th[i] = theta[i];
      const double fd = (lp - lm) / 2e-6;
      if (std::abs(fd) + std::abs(grad[i]) > 1e-8) worst = std::max(worst, rel_err(fd, grad[i]));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("surrogate at the rollout parameters") {
  const EnvConfig env = toy_env(CircuitKind::feedback_finite);
  const RecurrentGaussianModel model = toy_model(env, 5);
  const TrainBatch tb = compute_advantages(run_batch(*model.snapshot(), env, 32, 12), 1.0);
  PpoConfig cfg;
  cfg.lr.points = {{0, 1e-3}};
  const LossTerms lt = ppo_loss(tb, model, cfg);
  double mean_adv = 0.0;
  for (const auto& row : tb.advantages)
    for (double a : row) mean_adv += a;
  mean_adv /= static_cast<double>(tb.num_steps());
  CHECK(lt.policy == doctest::Approx(-mean_adv).epsilon(1e-10));
  CHECK(lt.clip_fraction == 0.0);
  CHECK(std::abs(lt.approx_kl) < 1e-12);
}

TEST_CASE("clipping") {
  // One step, one action dimension: rho is controlled through the mean.
  const std::vector<double> raw = {0.0};
  const double ls = std::log(0.5);
  PpoConfig cfg;
  cfg.lr.points = {{0, 1e-3}};
  cfg.clip = 0.1;
  const double old_lp = gaussian_log_prob({0.3}, {ls}, raw);
  auto at = [&](double mu, double adv_sign, std::vector<double>* grad) {
    ConstantGaussianModel m(2, {mu}, {ls}, 0.0);
    // Perfect value so only the policy term matters; advantage = reward - recorded value.
    Batch b = one_step_batch(raw, old_lp, -adv_sign, 0.0);
    TrainBatch tb = compute_advantages(b, 1.0);
    tb.returns[0][0] = 0.0;
    return ppo_loss(tb, m, cfg, grad);
  };
  const auto rho_of = [&](double mu) { return std::exp(gaussian_log_prob({mu}, {ls}, raw) - old_lp); };

  std::vector<double> grad;
  // mu towards the sample raises rho; at mu = 0.1 rho > 1.1.
  CHECK(rho_of(0.1) > 1.1);
  at(0.1, +1.0, &grad);
  CHECK(grad[0] == 0.0);
  CHECK(grad[1] == 0.0);
  // Inside the trust region the gradient is non-zero.
  CHECK(std::abs(rho_of(0.295) - 1.0) < 0.1);
  at(0.295, +1.0, &grad);
  CHECK(grad[0] != 0.0);

  // rho falls monotonically as mu moves from 0.3 to 1 and rises as it moves to 0.
  // Positive advantage: past either clip edge the loss never decreases as |rho - 1| grows.
  double prev = -1e9;
  for (double mu = 0.3; mu < 1.0; mu += 0.02) {
    if (rho_of(mu) >= 1.0 - cfg.clip) continue;
    const double l = at(mu, +1.0, nullptr).policy;
    CHECK(l >= prev);
    prev = l;
  }
  CHECK(prev > -(1.0 - cfg.clip));
  for (double mu = 0.3; mu >= 0.0; mu -= 0.02) {
    if (rho_of(mu) > 1.0 + cfg.clip) CHECK(at(mu, +1.0, nullptr).policy == doctest::Approx(-(1.0 + cfg.clip)));
  }
  // Negative advantage below the lower edge: saturated at (1 - clip)|A|.
  for (double mu = 0.4; mu < 1.0; mu += 0.05) {
    if (rho_of(mu) < 1.0 - cfg.clip) CHECK(at(mu, -1.0, nullptr).policy == doctest::Approx(1.0 - cfg.clip));
  }
}

TEST_CASE("zero advantages give no policy gradient") {
  const EnvConfig env = toy_env(CircuitKind::feedback_finite);
  RecurrentGaussianModel model = toy_model(env, 6);
  TrainBatch tb = compute_advantages(run_batch(*model.snapshot(), env, 16, 13), 1.0);
  for (auto& row : tb.advantages) std::fill(row.begin(), row.end(), 0.0);
  PpoConfig cfg;
  cfg.lr.points = {{0, 1e-3}};
  std::vector<double> grad;
  ppo_loss(tb, model, cfg, &grad);
  double norm = 0.0;
  for (double g : grad) norm += g * g;
  CHECK(norm > 0.0);  // the value term still pulls
  // Returns equal to the current values remove the value term as well.
  const auto ev = model.evaluate_tree(tb.batch.tree.parent, tb.batch.tree.input);
  for (std::size_t i = 0; i < tb.returns.size(); ++i)
    for (std::size_t t = 0; t < tb.returns[i].size(); ++t) tb.returns[i][t] = ev->value[tb.batch.episodes[i].steps[t].node];
  ppo_loss(tb, model, cfg, &grad);
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("flat reward landscape leaves the policy unchanged") {
  EnvConfig env = toy_env(CircuitKind::openloop_ideal);
  env.reward = std::make_shared<ZeroReward>();
  PolicyArch arch{env.input_dim(), env.action_dim(), 4, {6}, 0.3};
  PpoConfig cfg;
  cfg.lr.points = {{0, 1e-3}};
  cfg.B = 32;
  PpoTrainer tr(std::make_unique<RecurrentGaussianModel>(PolicyParams(arch, 1)), cfg, 2);
  const auto before = tr.model().theta();
  for (int e = 0; e < 3; ++e) tr.train_epoch(env);
  double drift = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i) drift = std::max(drift, std::abs(tr.model().theta()[i] - before[i]));
  CHECK(drift < 1e-3);
}

TEST_CASE("training is deterministic given the seed") {
  const EnvConfig env = toy_env(CircuitKind::feedback_finite);
  PolicyArch arch{env.input_dim(), env.action_dim(), 4, {6}, 0.3};
  PpoConfig cfg;
  cfg.lr.points = {{0, 1e-2}};
  cfg.B = 24;
  auto run = [&](int threads) {
    EnvConfig e = env;
    e.threads = threads;
    PpoTrainer tr(std::make_unique<RecurrentGaussianModel>(PolicyParams(arch, 1)), cfg, 9);
    std::vector<double> returns;
    for (int k = 0; k < 3; ++k) returns.push_back(tr.train_epoch(e).mean_return);
    return std::make_pair(tr.model().theta(), returns);
  };
  const auto a = run(1), b = run(1), c = run(3);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first == c.first);
}

TEST_CASE("deterministic extraction acts with the mean") {
  const EnvConfig env = toy_env(CircuitKind::openloop_ideal);
  const RecurrentGaussianModel model = toy_model(env, 7);
  const PolicyPtr det = extract_deterministic(model);
  CHECK(det->deterministic());
  const Batch b = run_batch(*det, env, 3, 1);
  for (const auto& ep : b.episodes)
    for (const auto& s : ep.steps) CHECK(s.raw == b.tree.output[s.node].mean);
}

TEST_CASE("decision trees") {
  const EnvConfig fb = toy_env(CircuitKind::feedback_finite, 5);
  const RecurrentGaussianModel model = toy_model(fb, 8);
  const DecisionTree tree = export_decision_tree(*extract_deterministic(model), fb);
  CHECK(tree.nodes.size() == 31);
  int leaves = 0;
  for (const auto& n : tree.nodes) leaves += n.depth == 4;
  CHECK(leaves == 16);
  CHECK(tree.at("0110").history == "0110");
  CHECK(tree.at("").depth == 0);
  // The two depth-1 nodes see different observations.
  CHECK(tree.at("0").mean != tree.at("1").mean);

  const auto j = nlohmann::json::parse(tree.to_json());
  CHECK(j["T"] == 5);
  CHECK(j["nodes"].size() == 31);
  CHECK(j["nodes"][3]["history"] == "00");

  // Open-loop: every node at a depth has the same action.
  EnvConfig ol = fb;
  ol.kind = CircuitKind::openloop_finite;
  const DecisionTree flat = export_decision_tree(*extract_deterministic(model), ol);
  for (const auto& n : flat.nodes) CHECK(n.mean == flat.at(std::string(n.depth, '1')).mean);
  CHECK_THROWS_AS(tree.at("00000"), std::out_of_range);
}
