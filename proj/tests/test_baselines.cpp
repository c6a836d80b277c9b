#include "doctest.h"

#include "qrl/baselines.hpp"
#include "qrl/rewards.hpp"
#include "qrl/targets.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace qrl;

namespace {

EnvConfig small_env() {
  EnvConfig cfg;
  cfg.fs = build_fock_space(12);
  cfg.T = 2;
  cfg.phi = 3;
  cfg.kind = CircuitKind::openloop_ideal;
  cfg.initial = basis_state(12, 0);
  cfg.target = basis_state(12, 1);
  cfg.reward = make_fock_reward(cfg.fs, 1);
  cfg.alpha_scale = 1.0;
  cfg.threads = 1;
  return cfg;
}

double norm_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("Nelder-Mead") {
  SUBCASE("quadratic bowl in 10 dimensions") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> xs(10), w(10);
    for (int i = 0; i < 10; ++i) {
      xs[i] = u(rng);
      w[i] = 1.0 + i * 0.2;
    }
    auto f = [&](const std::vector<double>& x) {
      double s = 0.0;
      for (int i = 0; i < 10; ++i) s += w[i] * (x[i] - xs[i]) * (x[i] - xs[i]);
      return s;
    };
    NelderMeadOptions opt;
    opt.max_evals = 2000;
    const OptimResult r = nelder_mead(f, std::vector<double>(10, 0.0), opt);
    CHECK(r.evaluations <= 2000);
    CHECK(norm_dist(r.best_x, xs) < 1e-3);
  }
  SUBCASE("Rosenbrock") {
    auto f = [](const std::vector<double>& x) {
      return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
    };
    NelderMeadOptions opt;
    opt.max_evals = 1000;
    const OptimResult r = nelder_mead(f, {-1.2, 1.0}, opt);
    CHECK(norm_dist(r.best_x, {1.0, 1.0}) < 1e-4);
  }
  SUBCASE("trace is monotone and counts evaluations") {
    int calls = 0;
    auto f = [&](const std::vector<double>& x) {
      ++calls;
      return x[0] * x[0] + std::abs(x[1]);
    };
    NelderMeadOptions opt;
    opt.max_evals = 137;
    std::int64_t hooked = 0;
    const OptimResult r = nelder_mead(f, {1.0, 1.0}, opt, [&](const TraceRow&, const std::vector<double>&) { ++hooked; });
    CHECK(r.evaluations == 137);
    CHECK(calls == 137);
    CHECK(hooked == 137);
    REQUIRE(r.trace.size() == 137);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].best_cost <= r.trace[i - 1].best_cost);
    CHECK(r.trace.back().best_cost == r.best_cost);
  }
}

TEST_CASE("simulated annealing") {
  SUBCASE("escapes the local minimum of a double well") {
    // Minima near x = +0.96 (local) and x = -1.04 (global).
    auto f = [](const std::vector<double>& x) { return std::pow(x[0] * x[0] - 1.0, 2) + 0.3 * x[0]; };
    int found = 0;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      AnnealingOptions opt;
      opt.seed = seed;
      opt.max_evals = 1000;
      const OptimResult r = simulated_annealing(f, {1.0}, opt);
      found += r.best_x[0] < 0.0;
    }
    CHECK(found >= 4);
  }
  SUBCASE("stays within the bounds") {
    AnnealingOptions opt;
    opt.lower = -0.5;
    opt.upper = 0.7;
    opt.max_evals = 500;
    bool inside = true;
    auto f = [&](const std::vector<double>& x) {
      for (double v : x) inside = inside && v >= opt.lower && v <= opt.upper;
      return x[0] + x[1];
    };
    const OptimResult r = simulated_annealing(f, {0.0, 0.0}, opt);
    CHECK(inside);
    CHECK(r.evaluations == 500);
    CHECK(r.best_cost < -0.9);
  }
  SUBCASE("reproducible for a fixed seed") {
    auto f = [](const std::vector<double>& x) { return std::sin(3.0 * x[0]) + x[1] * x[1]; };
    AnnealingOptions opt;
    opt.max_evals = 300;
    opt.seed = 5;
    const auto a = simulated_annealing(f, {0.3, 0.3}, opt), b = simulated_annealing(f, {0.3, 0.3}, opt);
    CHECK(a.best_x == b.best_x);
  }
}

TEST_CASE("visiting distribution") {
  Rng rng(3);
  std::vector<double> xs;
  for (int i = 0; i < 20000; ++i) xs.push_back(visiting_step(1.0, 1, 2.62, rng)[0]);
  std::sort(xs.begin(), xs.end());
  // Symmetric about zero, with tails heavier than a unit Gaussian.
  CHECK(std::abs(xs[xs.size() / 2]) < 0.05);
  const double q999 = xs[static_cast<std::size_t>(0.999 * xs.size())];
  const double q500 = xs[static_cast<std::size_t>(0.75 * xs.size())];
  CHECK(q999 / q500 > 3.09 / 0.674);
}

TEST_CASE("cost oracle budget ledger") {
  const EnvConfig env = small_env();
  const std::vector<double> x(2 * env.action_dim(), 0.1);
  SUBCASE("exact mode charges one episode per evaluation") {
    CostOracle o(env, OracleMode::exact_infidelity, 100, 1);
    const double c = o(x);
    CHECK(c == doctest::Approx(1.0 - o.fidelity(x)));
    o(x);
    CHECK(o.evaluations() == 2);
    CHECK(o.episodes() == 2);
  }
  SUBCASE("averaged mode charges the shot count") {
    CostOracle o(env, OracleMode::averaged_reward, 50, 1);
    for (int i = 0; i < 7; ++i) o(x);
    CHECK(o.evaluations() == 7);
    CHECK(o.episodes() == 7 * 50);
    CHECK(o.fidelity(x) >= 0.0);
    CHECK(o.episodes() == 7 * 50);  // fidelity is not charged
  }
  SUBCASE("averaged cost estimates the negated mean reward") {
    CostOracle o(env, OracleMode::averaged_reward, 4000, 2);
    const double f = o.fidelity(x);
    const double c = o(x);
    // Fock reward: E[R] = 2F - 1, per-shot variance 1 - (2F - 1)^2.
    const double mean = 2.0 * f - 1.0;
    CHECK(std::abs(-c - mean) < 4.0 * std::sqrt((1.0 - mean * mean) / 4000.0) + 1e-9);
  }
  SUBCASE("dimension mismatch is rejected") {
    CostOracle o(env, OracleMode::exact_infidelity, 1, 1);
    CHECK(o.dim() == static_cast<int>(x.size()));
    CHECK_THROWS_AS(o(std::vector<double>(3, 0.0)), std::invalid_argument);
  }
}
