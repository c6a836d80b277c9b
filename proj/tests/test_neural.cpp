#include "doctest.h"

#include "qrl/neural.hpp"

#include <cmath>
#include <random>

using namespace qrl;

namespace {

// Relative error with a floor: central differences carry about 1e-10 absolute noise.
double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-4, std::abs(a) + std::abs(b)); }

// Random tree over n nodes with parents drawn among earlier nodes (or roots).
std::vector<int> random_tree(int n, std::mt19937_64& rng) {
  std::vector<int> parent(n, -1);
  for (int k = 1; k < n; ++k) {
    std::uniform_int_distribution<int> u(-1, k - 1);
    parent[k] = u(rng);
  }
  return parent;
}

std::vector<std::vector<double>> random_inputs(int n, int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> x(n, std::vector<double>(dim));
  for (auto& v : x)
    for (double& e : v) e = g(rng);
  return x;
}

}  // namespace

TEST_CASE("recurrent net gradients match finite differences") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  const std::vector<NetSpec> specs = {
      {3, 4, {}, 2},
      {5, 6, {7}, 3},
      {4, 3, {5, 4}, 1},
  };
  for (const auto& spec : specs) {
    const RecurrentNet net(spec, 0);
    std::vector<double> theta(net.size());
    for (double& w : theta) w = 0.5 * g(rng);
    const int n = 7;
    const auto parent = random_tree(n, rng);
    const auto inputs = random_inputs(n, spec.input_dim, rng);
    // Loss = sum_k <c_k, out_k> with fixed random c.
    const auto coef = random_inputs(n, spec.output_dim, rng);
    auto loss = [&](const std::vector<double>& th) {
      const auto cache = net.forward_tree(th.data(), parent, inputs);
      double l = 0.0;
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < spec.output_dim; ++j) l += coef[k][j] * cache[k].out[j];
      return l;
    };
    const auto cache = net.forward_tree(theta.data(), parent, inputs);
    std::vector<double> grad(theta.size(), 0.0);
    net.backward_tree(theta.data(), parent, cache, coef, grad.data());
    double worst = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double h = 1e-6;
      auto tp = theta, tm = theta;
      tp[i] += h;
      tm[i] -= h;
      const double fd = (loss(tp) - loss(tm)) / (2.0 * h);
      if (std::abs(fd) + std::abs(grad[i]) > 1e-8) worst = std::max(worst, rel_err(fd, grad[i]));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("tree forward equals per-sequence forward") {
  std::mt19937_64 rng(2);
  PolicyArch arch{6, 3, 5, {4}, 0.3};
  PolicyParams p(arch, 7);
  // Two sequences sharing the first step.
  const auto x = random_inputs(3, 6, rng);
  const std::vector<int> parent = {-1, 0, 0};
  const auto tree = p.policy_net().forward_tree(p.theta.data(), parent, x);
  const auto seq_a = forward(p, {x[0], x[1]});
  const auto seq_b = forward(p, {x[0], x[2]});
  for (int j = 0; j < 3; ++j) {
    CHECK(tree[1].out[j] == doctest::Approx(seq_a[1].mean[j]).epsilon(1e-12));
    CHECK(tree[2].out[j] == doctest::Approx(seq_b[1].mean[j]).epsilon(1e-12));
  }
}

TEST_CASE("initialisation") {
  PolicyArch arch{6, 4, 8, {10}, 0.3};
  PolicyParams a(arch, 42), b(arch, 42), c(arch, 43);
  CHECK(a.theta == b.theta);
  CHECK(a.theta != c.theta);
  const auto out = forward(a, {std::vector<double>(6, 0.0)});
  for (double s : out[0].log_std) CHECK(s == doctest::Approx(std::log(0.3)));
  CHECK(out[0].value == 0.0);

  // Zero weights: zero mean, log-std 0, zero value.
  PolicyParams z = a;
  std::fill(z.theta.begin(), z.theta.end(), 0.0);
  const auto zo = forward(z, {std::vector<double>(6, 1.0), std::vector<double>(6, -1.0)});
  for (const auto& st : zo) {
    for (double m : st.mean) CHECK(m == 0.0);
    for (double s : st.log_std) CHECK(s == 0.0);
    CHECK(st.value == 0.0);
  }
  // Same input twice gives the same outputs.
  const auto o1 = forward(a, {std::vector<double>(6, 0.5)});
  const auto o2 = forward(a, {std::vector<double>(6, 0.5)});
  CHECK(o1[0].mean == o2[0].mean);
}

TEST_CASE("log-std clamp") {
  CHECK(clamp_log_std(-9.0) == kLogStdMin);
  CHECK(clamp_log_std(4.0) == kLogStdMax);
  CHECK(clamp_log_std(0.2) == 0.2);
  PolicyArch arch{3, 2, 3, {}, 0.3};
  PolicyParams p(arch, 1);
  for (double& w : p.theta) w *= 50.0;
  std::mt19937_64 rng(3);
  for (const auto& x : random_inputs(20, 3, rng)) {
    for (double s : forward(p, {x})[0].log_std) CHECK((s >= kLogStdMin && s <= kLogStdMax));
  }
}

TEST_CASE("Gaussian log-density") {
  const int d = 4;
  const std::vector<double> mu = {0.1, -0.2, 0.3, 0.0}, ls(d, 0.0);
  CHECK(log_prob(mu, ls, mu) == doctest::Approx(-0.5 * d * std::log(2.0 * kPi)));
  std::vector<double> dm, dl;
  log_prob_grad(mu, ls, mu, dm, dl);
  for (double v : dm) CHECK(v == 0.0);

  const std::vector<double> ls2 = {-0.3, 0.2, 0.1, -1.0}, raw = {0.5, 0.1, -0.4, 0.2};
  log_prob_grad(mu, ls2, raw, dm, dl);
  for (int i = 0; i < d; ++i) {
    const double h = 1e-6;
    auto mp = mu, mm = mu, lp = ls2, lm = ls2;
    mp[i] += h;
    mm[i] -= h;
    lp[i] += h;
    lm[i] -= h;
    CHECK(rel_err((log_prob(mp, ls2, raw) - log_prob(mm, ls2, raw)) / (2 * h), dm[i]) < 1e-6);
    CHECK(rel_err((log_prob(mu, lp, raw) - log_prob(mu, lm, raw)) / (2 * h), dl[i]) < 1e-6);
  }
}

TEST_CASE("Adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<double> th = {1.0, -2.0};
    AdamState st(2);
    adam_step(th, {0.0, 0.0}, st, 1e-3);
    CHECK(th == std::vector<double>{1.0, -2.0});
  }
  SUBCASE("gradient clipping") {
    std::vector<double> th(4, 0.0);
    AdamState st(4);
    const std::vector<double> grad = {5.0, 5.0, 5.0, 5.0};  // norm 10
    CHECK(adam_step(th, grad, st, 1e-3) == doctest::Approx(10.0));
    // After clipping the applied gradient has norm 1: m = 0.1 * clipped.
    double mn = 0.0;
    for (double m : st.m) mn += m * m;
    CHECK(std::sqrt(mn) == doctest::Approx(0.1));
  }
  SUBCASE("quadratic converges") {
    std::vector<double> w = {3.0, -1.0, 0.5}, target = {1.0, 2.0, -0.5};
    AdamState st(3);
    for (int i = 0; i < 5000; ++i) {
      std::vector<double> g(3);
      for (int k = 0; k < 3; ++k) g[k] = 2.0 * (w[k] - target[k]);
      adam_step(w, g, st, 1e-2, 1e9);
    }
    for (int k = 0; k < 3; ++k) CHECK(std::abs(w[k] - target[k]) < 1e-3);
  }
  SUBCASE("non-finite gradients are rejected") {
    std::vector<double> th = {1.0};
    AdamState st(1);
    CHECK_THROWS_AS(adam_step(th, {std::nan("")}, st, 1e-3), std::domain_error);
    CHECK(th[0] == 1.0);
  }
}

TEST_CASE("learning-rate schedule") {
  LrSchedule s;
  s.points = {{0, 1e-3}, {500, 1e-4}};
  CHECK(s.at(0) == 1e-3);
  CHECK(s.at(499) == 1e-3);
  CHECK(s.at(500) == 1e-4);
  CHECK(s.at(10000) == 1e-4);
}

TEST_CASE("trainable models backpropagate through the tree") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  PolicyArch arch{4, 2, 3, {5}, 0.3};
  PolicyParams p(arch, 9);
  for (double& w : p.theta) w += 0.2 * g(rng);
  RecurrentGaussianModel rec(p);
  ConstantGaussianModel con(4, {0.1, -0.3}, {-0.5, 0.2}, 0.4);
  const std::vector<int> parent = {-1, 0, 0, 1};
  const auto x = random_inputs(4, 4, rng);
  const auto cm = random_inputs(4, 2, rng), cl = random_inputs(4, 2, rng);
  const auto cv = random_inputs(1, 4, rng)[0];
  for (TrainableModel* m : std::vector<TrainableModel*>{&rec, &con}) {
    auto loss = [&](const std::vector<double>& th) {
      const auto saved = m->theta();
      m->theta() = th;
      const auto ev = m->evaluate_tree(parent, x);
      m->theta() = saved;
      double l = 0.0;
      for (int k = 0; k < 4; ++k) {
        for (int j = 0; j < 2; ++j) l += cm[k][j] * ev->mean[k][j] + cl[k][j] * ev->log_std[k][j];
        l += cv[k] * ev->value[k];
      }
      return l;
    };
    const auto ev = m->evaluate_tree(parent, x);
    std::vector<double> grad(m->theta().size(), 0.0);
    ev->backward(cm, cl, cv, grad);
    const auto th = m->theta();
    double worst = 0.0;
    for (std::size_t i = 0; i < th.size(); ++i) {
      auto tp = th, tm = th;
      tp[i] += 1e-6;
      tm[i] -= 1e-6;
      const double fd = (loss(tp) - loss(tm)) / 2e-6;
      if (std::abs(fd) + std::abs(grad[i]) > 1e-8) worst = std::max(worst, rel_err(fd, grad[i]));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("snapshot policies step like the model") {
  PolicyArch arch{4, 2, 3, {}, 0.3};
  RecurrentGaussianModel m(PolicyParams(arch, 3));
  const auto pol = m.snapshot();
  std::mt19937_64 rng(6);
  const auto x = random_inputs(2, 4, rng);
  const auto s0 = pol->step(pol->initial_carry(), x[0]);
  const auto s1 = pol->step(s0.carry, x[1]);
  const auto ev = m.evaluate_tree({-1, 0}, x);
  for (int j = 0; j < 2; ++j) {
    CHECK(s1.mean[j] == doctest::Approx(ev->mean[1][j]).epsilon(1e-12));
    CHECK(s1.log_std[j] == doctest::Approx(ev->log_std[1][j]).epsilon(1e-12));
  }
  CHECK(s1.value == doctest::Approx(ev->value[1]).epsilon(1e-12));
}
