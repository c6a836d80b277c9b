#include "qrl/baselines.hpp"


#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace qrl {

std::string to_string(OracleMode m) { return m == OracleMode::exact_infidelity ? "exact" : "averaged"; }

FixedSequencePolicy sequence_policy(const std::vector<double>& x, const EnvConfig& env) {
  const int A = env.action_dim();
  if (static_cast<int>(x.size()) != env.T * A)
    throw std::invalid_argument("sequence_policy: expected " + std::to_string(env.T * A) + " parameters, got " +
                                std::to_string(x.size()));
  std::vector<std::vector<double>> raw(env.T);
  for (int t = 0; t < env.T; ++t) raw[t].assign(x.begin() + t * A, x.begin() + (t + 1) * A);
  return FixedSequencePolicy(std::move(raw), env.T);
}

CostOracle::CostOracle(EnvConfig env, OracleMode mode, int shots, std::uint64_t seed)
    : env_(std::move(env)), mode_(mode), shots_(shots), seed_(seed) {
  env_.validate();
  if (mode_ == OracleMode::averaged_reward && shots_ < 1)
    throw std::invalid_argument("CostOracle: averaged mode needs shots >= 1");
}

double CostOracle::fidelity(const std::vector<double>& x) const {
  return evaluate_policy(sequence_policy(x, env_), env_);
}

double CostOracle::operator()(const std::vector<double>& x) {
  const FixedSequencePolicy policy = sequence_policy(x, env_);
  const std::uint64_t stream = derive_seed(seed_, static_cast<std::uint64_t>(evaluations_));
  ++evaluations_;
  episodes_ += episodes_per_eval();
  if (mode_ == OracleMode::exact_infidelity) return 1.0 - evaluate_policy(policy, env_);

  double sum = 0.0;
  if (env_.has_measurements()) {
    const Batch b = run_batch(policy, env_, shots_, stream);
    for (const auto& ep : b.episodes) sum += ep.reward;
  } else {
    // Deterministic circuit: one simulation, then `shots` independent reward circuits.
    EnvConfig single = env_;
    single.keep_final_state = true;
    Rng rng(stream);
    const EpisodeRecord ep = run_episode(policy, single, rng);
    sum = ep.reward;
    for (int k = 1; k < shots_; ++k) sum += env_.reward->sample(*ep.final_state, rng).reward;
  }
  return -sum / shots_;
}

// ---- shared bookkeeping ----

namespace {

struct BudgetExhausted {};

// Counts evaluations, tracks the best point and appends trace rows.
class Tracker {
 public:
  Tracker(const Objective& f, std::int64_t max_evals, const TraceHook& hook)
      : f_(f), max_evals_(max_evals), hook_(hook) {
    if (max_evals < 1) throw std::invalid_argument("optimiser: max_evals must be >= 1");
  }

  double operator()(const std::vector<double>& x) {
    if (res.evaluations >= max_evals_) throw BudgetExhausted{};
    const double c = f_(x);
    ++res.evaluations;
    if (res.best_x.empty() || c < res.best_cost) {
      res.best_cost = c;
      res.best_x = x;
    }
    TraceRow row{res.evaluations, 0, c, res.best_cost};
    res.trace.push_back(row);
    if (hook_) hook_(row, res.best_x);
    return c;
  }

  OptimResult res;

 private:
  const Objective& f_;
  std::int64_t max_evals_;
  const TraceHook& hook_;
};

}  // namespace

// ---- Nelder-Mead ----

OptimResult nelder_mead(const Objective& f, std::vector<double> x0, const NelderMeadOptions& opt,
                        const TraceHook& hook) {
  const std::size_t n = x0.size();
  if (n == 0) throw std::invalid_argument("nelder_mead: empty x0");
  Tracker eval(f, opt.max_evals, hook);
  std::vector<std::vector<double>> sim(n + 1, x0);
  std::vector<double> fsim(n + 1);
  auto order = [&] {
    std::vector<std::size_t> idx(n + 1);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fsim[a] < fsim[b]; });
    std::vector<std::vector<double>> s2(n + 1);
    std::vector<double> f2(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      s2[k] = std::move(sim[idx[k]]);
      f2[k] = fsim[idx[k]];
    }
    sim = std::move(s2);
    fsim = std::move(f2);
  };
  auto combo = [&](double a, const std::vector<double>& u, double b, const std::vector<double>& v) {
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = a * u[i] + b * v[i];
    return r;
  };
  try {
    for (std::size_t k = 1; k <= n; ++k) sim[k][k - 1] += opt.initial_step;
    for (std::size_t k = 0; k <= n; ++k) fsim[k] = eval(sim[k]);
    order();
    const double rho = opt.reflect, chi = opt.expand, psi = opt.contract, sigma = opt.shrink;
    while (true) {
      double xspread = 0.0, fspread = 0.0;
      for (std::size_t k = 1; k <= n; ++k) {
        fspread = std::max(fspread, std::abs(fsim[k] - fsim[0]));
        for (std::size_t i = 0; i < n; ++i) xspread = std::max(xspread, std::abs(sim[k][i] - sim[0][i]));
      }
      if (xspread <= opt.xatol && fspread <= opt.fatol) break;

      std::vector<double> xbar(n, 0.0);
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i) xbar[i] += sim[k][i] / static_cast<double>(n);
      const auto& worst = sim[n];
      const auto xr = combo(1.0 + rho, xbar, -rho, worst);
      const double fxr = eval(xr);
      bool shrink = false;
      if (fxr < fsim[0]) {
        const auto xe = combo(1.0 + rho * chi, xbar, -rho * chi, worst);
        const double fxe = eval(xe);
        if (fxe < fxr) {
          sim[n] = xe;
          fsim[n] = fxe;
        } else {
          sim[n] = xr;
          fsim[n] = fxr;
        }
      } else if (fxr < fsim[n - 1]) {
        sim[n] = xr;
        fsim[n] = fxr;
      } else if (fxr < fsim[n]) {
        const auto xc = combo(1.0 + psi * rho, xbar, -psi * rho, worst);
        const double fxc = eval(xc);
        if (fxc <= fxr) {
          sim[n] = xc;
          fsim[n] = fxc;
        } else {
          shrink = true;
        }
      } else {
        const auto xcc = combo(1.0 - psi, xbar, psi, worst);
        const double fxcc = eval(xcc);
        if (fxcc < fsim[n]) {
          sim[n] = xcc;
          fsim[n] = fxcc;
        } else {
          shrink = true;
        }
      }
      if (shrink) {
        for (std::size_t k = 1; k <= n; ++k) {
          sim[k] = combo(1.0 - sigma, sim[0], sigma, sim[k]);
          fsim[k] = eval(sim[k]);
        }
      }
      order();
    }
  } catch (const BudgetExhausted&) {
  }
  return std::move(eval.res);
}

// ---- generalized simulated annealing ----

std::vector<double> visiting_step(double temperature, int dim, double qv, Rng& rng) {
  // Tsallis-Stariolo visiting distribution as in generalized simulated annealing.
  const double factor2 = std::exp((4.0 - qv) * std::log(qv - 1.0));
  const double factor3 = std::exp((2.0 - qv) * std::log(2.0) / (qv - 1.0));
  const double factor4_p = std::sqrt(kPi) * factor2 / (factor3 * (3.0 - qv));
  const double factor5 = 1.0 / (qv - 1.0) - 0.5;
  const double d1 = 2.0 - factor5;
  const double factor6 = kPi * (1.0 - factor5) / std::sin(kPi * (1.0 - factor5)) / std::tgamma(d1);
  const double factor1 = std::exp(std::log(temperature) / (qv - 1.0));
  const double factor4 = factor4_p * factor1;
  const double sigmax = std::exp(-(qv - 1.0) * std::log(factor6 / factor4) / (3.0 - qv));
  std::vector<double> v(dim);
  for (int i = 0; i < dim; ++i) {
    const double x = rng.normal() * sigmax;
    const double y = rng.normal();
    const double den = std::exp((qv - 1.0) * std::log(std::abs(y)) / (3.0 - qv));
    v[i] = x / den;
  }
  return v;
}

OptimResult simulated_annealing(const Objective& f, std::vector<double> x0, const AnnealingOptions& opt,
                                const TraceHook& hook) {
  const int n = static_cast<int>(x0.size());
  if (n == 0) throw std::invalid_argument("simulated_annealing: empty x0");
  if (!(opt.upper > opt.lower)) throw std::invalid_argument("simulated_annealing: bad bounds");
  if (!(opt.visit > 1.0 && opt.visit < 3.0)) throw std::invalid_argument("simulated_annealing: visit must be in (1, 3)");
  constexpr double kTailLimit = 1e8;
  constexpr double kMinVisitBound = 1e-10;
  constexpr int kNotImprovedMax = 1000;
  Tracker eval(f, opt.max_evals, hook);
  Rng rng(opt.seed);
  const double range = opt.upper - opt.lower;
  auto wrap = [&](double x) {
    // Periodic wrap into [lower, upper).
    double a = std::fmod(x - opt.lower, range);
    if (a < 0) a += range;
    return a + opt.lower;
  };
  for (double& x : x0) x = std::clamp(x, opt.lower, opt.upper);

  try {
    std::vector<double> cur = x0;
    double ecur = eval(cur);
    const double qv = opt.visit, qa = opt.accept;
    const double t1 = std::exp((qv - 1.0) * std::log(2.0)) - 1.0;
    const double t_restart = opt.initial_temp * opt.restart_temp_ratio;
    int not_improved = 0;
    while (true) {
      for (std::int64_t i = 0;; ++i) {
        const double s = static_cast<double>(i) + 2.0;
        const double t2 = std::exp((qv - 1.0) * std::log(s)) - 1.0;
        const double temp = opt.initial_temp * t1 / t2;
        if (temp < t_restart) {
          for (double& x : cur) x = opt.lower + range * rng.uniform();
          ecur = eval(cur);
          break;
        }
        const double temp_step = temp / static_cast<double>(i + 1);
        ++not_improved;
        for (int j = 0; j < 2 * n; ++j) {
          std::vector<double> cand = cur;
          if (j < n) {
            auto v = visiting_step(temp, n, qv, rng);
            for (int d = 0; d < n; ++d) {
              v[d] = std::clamp(v[d], -kTailLimit, kTailLimit);
              cand[d] = wrap(cur[d] + v[d]);
              if (std::abs(cand[d] - opt.lower) < kMinVisitBound) cand[d] += kMinVisitBound;
            }
          } else {
            const int d = j - n;
            const double v = std::clamp(visiting_step(temp, 1, qv, rng)[0], -kTailLimit, kTailLimit);
            cand[d] = wrap(cur[d] + v);
            if (std::abs(cand[d] - opt.lower) < kMinVisitBound) cand[d] += kMinVisitBound;
          }
          const double e = eval(cand);
          if (e < ecur) {
            cur = std::move(cand);
            ecur = e;
            if (e <= eval.res.best_cost) not_improved = 0;
            continue;
          }
          const double r = rng.uniform();
          const double p_tmp = 1.0 - (1.0 - qa) * (e - ecur) / temp_step;
          const double p = p_tmp <= 0.0 ? 0.0 : std::exp(std::log(p_tmp) / (1.0 - qa));
          if (r <= p) {
            cur = std::move(cand);
            ecur = e;
          }
          if (not_improved >= kNotImprovedMax && j == 0) {
            cur = eval.res.best_x;
            ecur = eval.res.best_cost;
          }
        }
      }
    }
  } catch (const BudgetExhausted&) {
  }
  return std::move(eval.res);
}

}  // namespace qrl
