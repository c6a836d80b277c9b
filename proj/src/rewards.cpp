#include "qrl/rewards.hpp"

#include "qrl/gates.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace qrl {

int disentangle(StateVector& joint, int N, Rng& rng) {
  const int m1 = measure_qubit(joint, N, rng);
  reset_to_ground(joint, N, m1);
  return m1;
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Normalised oscillator branches with their probabilities.
template <class F>
double average_over_branches(const StateVector& joint, int N, F&& f) {
  double acc = 0.0;
  for (int q = 0; q < 2; ++q) {
    const double p = joint.segment(q * N, N).squaredNorm();
    if (p < 1e-300) continue;
    const StateVector psi = joint.segment(q * N, N) / std::sqrt(p);
    acc += p * f(psi);
  }
  return acc;
}

class FockReward final : public RewardScheme {
 public:
  FockReward(FockSpacePtr fs, int n) : fs_(std::move(fs)), n_(n) {
    if (n < 0 || n >= fs_->dim()) throw std::invalid_argument("fock reward: level outside the space");
  }
  std::string name() const override { return "fock(" + std::to_string(n_) + ")"; }

  RewardOutcome sample(const StateVector& joint, Rng& rng) const override {
    const int N = fs_->dim();
    StateVector s = joint;
    RewardOutcome out;
    out.m1 = disentangle(s, N, rng);
    apply_selective_pi(s, N, n_);
    out.m2 = measure_qubit(s, N, rng);
    out.reward = -out.m2;
    return out;
  }

  double expected(const StateVector& joint) const override {
    const int N = fs_->dim();
    return 2.0 * (std::norm(joint(n_)) + std::norm(joint(N + n_))) - 1.0;
  }

 private:
  FockSpacePtr fs_;
  int n_;
};

class TargetProjectorReward final : public RewardScheme {
 public:
  explicit TargetProjectorReward(StateVector target) : target_(std::move(target)) {
    if (std::abs(target_.norm() - 1.0) > 1e-9) throw std::invalid_argument("target projector: target not normalised");
  }
  std::string name() const override { return "target_projector"; }

  RewardOutcome sample(const StateVector& joint, Rng& rng) const override {
    const int N = static_cast<int>(target_.size());
    StateVector s = joint;
    RewardOutcome out;
    out.m1 = disentangle(s, N, rng);
    const double p = std::norm(target_.dot(s.head(N)));
    out.m2 = rng.uniform() < p ? -1 : +1;
    out.reward = -out.m2;
    return out;
  }

  double expected(const StateVector& joint) const override { return 2.0 * reduced_fidelity(joint, target_) - 1.0; }

 private:
  StateVector target_;
};

class GkpReward final : public RewardScheme {
 public:
  GkpReward(FockSpacePtr fs, double delta) : fs_(std::move(fs)), delta_(delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("gkp reward: delta must be positive");
  }
  std::string name() const override { return "gkp_stabilizer"; }

  RewardOutcome sample(const StateVector& joint, Rng& rng) const override {
    const int N = fs_->dim();
    RewardOutcome out;
    out.direction = rng.uniform() < 0.5 ? 'x' : 'p';
    StateVector s = joint;
    out.m1 = disentangle(s, N, rng);
    apply_gkp_probe(*fs_, s, delta_, out.direction);
    out.m2 = measure_qubit(s, N, rng);
    out.reward = out.m2;
    return out;
  }

  double expected(const StateVector& joint) const override {
    return average_over_branches(joint, fs_->dim(), [&](const StateVector& psi) {
      const double px = gkp_probe_ground_probability(*fs_, psi, delta_, 'x');
      const double pp = gkp_probe_ground_probability(*fs_, psi, delta_, 'p');
      return 0.5 * ((2.0 * px - 1.0) + (2.0 * pp - 1.0));
    });
  }

 private:
  FockSpacePtr fs_;
  double delta_;
};

class WignerReward final : public RewardScheme {
 public:
  WignerReward(FockSpacePtr fs, WignerTable table, int points)
      : fs_(std::move(fs)), sampler_(table), points_(points) {
    if (points < 1) throw std::invalid_argument("wigner reward: points must be >= 1");
  }
  std::string name() const override { return "wigner(" + std::to_string(points_) + ")"; }
  int shots_per_episode() const override { return points_; }

  RewardOutcome sample(const StateVector& joint, Rng& rng) const override {
    const int N = fs_->dim();
    const auto& t = sampler_.table();
    RewardOutcome out;
    double total = 0.0;
    for (int j = 0; j < points_; ++j) {
      const std::size_t idx = sampler_.draw(rng);
      const cplx alpha = t.point(idx);
      StateVector s = joint;
      const int m1 = disentangle(s, N, rng);
      if (j == 0) out.m1 = m1;
      apply_displacement(*fs_, -alpha, s, /*skip_e=*/true);
      apply_qubit(qubit_rotation(kPi / 2.0, kPi / 2.0), s, N);
      apply_cond_parity(s, N);
      apply_qubit(qubit_rotation(kPi / 2.0, -kPi / 2.0), s, N);
      const int m = measure_qubit(s, N, rng);
      out.alphas.push_back(alpha);
      out.outcomes.push_back(m);
      total += m * sign(t.values[idx]);
    }
    out.m2 = out.outcomes.front();
    out.reward = total / points_;
    return out;
  }

  double expected(const StateVector& joint) const override {
    // Linear in rho_osc, so the disentangling branches add up.
    const int N = fs_->dim();
    const auto& t = sampler_.table();
    const double cut = 1e-14 * t.max_abs;
    double acc = 0.0;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      if (std::abs(t.values[i]) <= cut) continue;
      const cplx a = t.point(i);
      const double w = wigner_exact(joint.head(N), a) + wigner_exact(joint.tail(N), a);
      acc += t.values[i] * (kPi / 2.0) * w;
    }
    double norm = 0.0;
    for (double v : t.values) norm += std::abs(v);
    return acc / norm;
  }

 private:
  FockSpacePtr fs_;
  PhaseSpaceSampler sampler_;
  int points_;
};

class CharReward final : public RewardScheme {
 public:
  CharReward(FockSpacePtr fs, PhaseTable table, int points) : fs_(std::move(fs)), sampler_(table), points_(points) {
    if (points < 1) throw std::invalid_argument("char reward: points must be >= 1");
  }
  std::string name() const override { return "char_fn(" + std::to_string(points_) + ")"; }
  int shots_per_episode() const override { return points_; }

  RewardOutcome sample(const StateVector& joint, Rng& rng) const override {
    const int N = fs_->dim();
    const auto& t = sampler_.table();
    RewardOutcome out;
    double total = 0.0;
    for (int j = 0; j < points_; ++j) {
      const std::size_t idx = sampler_.draw(rng);
      const cplx alpha = t.point(idx);
      StateVector s = joint;
      const int m1 = disentangle(s, N, rng);
      if (j == 0) out.m1 = m1;
      apply_qubit(qubit_rotation(kPi / 2.0, kPi / 2.0), s, N);
      apply_cond_displacement(*fs_, alpha, s);
      apply_qubit(qubit_rotation(kPi / 2.0, -kPi / 2.0), s, N);
      const int m = measure_qubit(s, N, rng);
      out.alphas.push_back(alpha);
      out.outcomes.push_back(m);
      total += m * sign(t.values[idx]);
    }
    out.m2 = out.outcomes.front();
    out.reward = total / points_;
    return out;
  }

  double expected(const StateVector& joint) const override {
    const int N = fs_->dim();
    const auto& t = sampler_.table();
    const double cut = 1e-14 * t.max_abs;
    double acc = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      norm += std::abs(t.values[i]);
      if (std::abs(t.values[i]) <= cut) continue;
      const cplx a = t.point(i);
      const double c = char_fn_exact(joint.head(N), a).real() + char_fn_exact(joint.tail(N), a).real();
      acc += t.values[i] * c;
    }
    return acc / norm;
  }

 private:
  FockSpacePtr fs_;
  PhaseSpaceSampler sampler_;
  int points_;
};

class QubitExcitationReward final : public RewardScheme {
 public:
  explicit QubitExcitationReward(int N) : N_(N) {}
  std::string name() const override { return "qubit_excitation"; }

  RewardOutcome sample(const StateVector& joint, Rng& rng) const override {
    StateVector s = joint;
    RewardOutcome out;
    out.m2 = measure_qubit(s, N_, rng);
    out.reward = -out.m2;
    return out;
  }

  double expected(const StateVector& joint) const override {
    return joint.tail(N_).squaredNorm() - joint.head(N_).squaredNorm();
  }

 private:
  int N_;
};

}  // namespace

// ---- sampler ----

PhaseSpaceSampler::PhaseSpaceSampler(const PhaseTable& table, int max_attempts)
    : table_(table), max_attempts_(max_attempts) {
  if (table_.values.empty() || !(table_.max_abs > 0.0)) throw std::invalid_argument("sampler: empty table");
}

std::size_t PhaseSpaceSampler::draw(Rng& rng) const {
  const std::size_t n = table_.values.size();
  for (int attempt = 0; attempt < max_attempts_; ++attempt) {
    const std::size_t idx = rng.index(n);
    if (rng.uniform() * table_.max_abs < std::abs(table_.values[idx])) return idx;
  }
  throw std::runtime_error("sampler: rejection sampling exceeded " + std::to_string(max_attempts_) + " attempts");
}

// ---- stabilizer probe ----

void apply_gkp_probe(const FockSpace& fs, StateVector& joint, double delta, char direction) {
  const int N = fs.dim();
  const double d2 = delta * delta;
  const cplx unit = direction == 'x' ? cplx(1.0, 0.0) : kI;
  const cplx big = std::sqrt(kPi) * std::cosh(d2) * unit;
  const cplx trim = -kI * std::sqrt(kPi) * std::sinh(d2) * unit;
  apply_qubit(qubit_rotation(kPi / 2.0, -kPi / 2.0), joint, N);
  apply_cond_displacement(fs, trim, joint);
  apply_qubit(qubit_rotation(0.0, kPi / 2.0), joint, N);
  apply_cond_displacement(fs, big, joint);
  apply_qubit(qubit_rotation(kPi / 2.0, kPi / 2.0), joint, N);
}

double gkp_probe_ground_probability(const FockSpace& fs, const StateVector& psi, double delta, char direction) {
  StateVector s = joint_state(0, psi);
  apply_gkp_probe(fs, s, delta, direction);
  return prob_ground(s, fs.dim()) / s.squaredNorm();
}

// ---- factories ----

RewardPtr make_fock_reward(FockSpacePtr fs, int n) { return std::make_shared<FockReward>(std::move(fs), n); }
RewardPtr make_target_projector_reward(StateVector target) {
  return std::make_shared<TargetProjectorReward>(std::move(target));
}
RewardPtr make_gkp_reward(FockSpacePtr fs, double delta) { return std::make_shared<GkpReward>(std::move(fs), delta); }
RewardPtr make_wigner_reward(FockSpacePtr fs, WignerTable target, int points) {
  return std::make_shared<WignerReward>(std::move(fs), std::move(target), points);
}
RewardPtr make_char_reward(FockSpacePtr fs, PhaseTable target, int points) {
  return std::make_shared<CharReward>(std::move(fs), std::move(target), points);
}
RewardPtr make_qubit_excitation_reward(int N) { return std::make_shared<QubitExcitationReward>(N); }

void write_samples_csv(const std::vector<RewardOutcome>& outcomes, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_samples_csv: cannot open " + path);
  out << "episode,point,alpha_re,alpha_im,m,reward\n";
  out.precision(12);
  for (std::size_t e = 0; e < outcomes.size(); ++e) {
    const auto& o = outcomes[e];
    for (std::size_t j = 0; j < o.alphas.size(); ++j) {
      out << e << ',' << j << ',' << o.alphas[j].real() << ',' << o.alphas[j].imag() << ',' << o.outcomes[j] << ','
          << o.reward << '\n';
    }
  }
}

}  // namespace qrl
