#include "qrl/gates.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qrl {

double reduce_phase(double phi) {
  double r = std::remainder(phi, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

SnapPhases::SnapPhases(std::vector<double> p) : phases(std::move(p)) {
  for (double& v : phases) v = reduce_phase(v);
}

namespace {

void check_leak(double leak, double leak_max, const char* what) {
  if (leak > leak_max) {
    throw std::domain_error(std::string(what) + ": truncation leak " + std::to_string(leak) +
                            " exceeds " + std::to_string(leak_max));
  }
}

// Row phases e^{i c v_j} applied to an N x k block.
void scale_rows(Eigen::MatrixXcd& m, const RealVector& v, double c) {
  for (Eigen::Index j = 0; j < m.rows(); ++j) m.row(j) *= std::polar(1.0, c * v(j));
}

void displace_block(const FockSpace& fs, cplx alpha, Eigen::Map<Eigen::MatrixXcd> block) {
  const double re = alpha.real(), im = alpha.imag();
  Eigen::MatrixXcd t = fs.up_adj() * block;
  scale_rows(t, fs.p_eig().values, -std::sqrt(2.0) * re);
  Eigen::MatrixXcd u = fs.w() * t;
  scale_rows(u, fs.x_eig().values, std::sqrt(2.0) * im);
  block.noalias() = fs.ux() * u;
  block *= std::polar(1.0, -im * re);
}

}  // namespace

// ---- operator constructors ----

ComplexMatrix displacement(const FockSpace& fs, cplx alpha, double leak_max) {
  const int N = fs.dim();
  check_leak(poisson_tail(std::norm(alpha), N), leak_max, "displacement");
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(N, N);
  displace_block(fs, alpha, Eigen::Map<Eigen::MatrixXcd>(m.data(), N, N));
  return m;
}

ComplexMatrix snap_ideal(const SnapPhases& phases, const FockSpace& fs) {
  const int N = fs.dim();
  if (phases.levels() > N) throw std::invalid_argument("snap_ideal: Phi exceeds N");
  ComplexMatrix m = ComplexMatrix::Identity(N, N);
  for (int n = 0; n < phases.levels(); ++n) m(n, n) = std::polar(1.0, phases.phases[n]);
  return m;
}

ComplexMatrix snap_finite(const SnapPhases& phases, const PulseModelParams& params, const FockSpace& fs) {
  const int N = fs.dim();
  if (phases.levels() != params.phi_levels) throw std::invalid_argument("snap_finite: phase count differs from Phi");
  const SnapPulseModel model(params, N);
  const auto blocks = model.level_blocks(phases);
  ComplexMatrix m = ComplexMatrix::Zero(2 * N, 2 * N);
  for (int n = 0; n < N; ++n) {
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) m(r * N + n, c * N + n) = blocks[n](r, c);
  }
  return m;
}

Qubit2 qubit_rotation(double phi, double theta) {
  const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
  Qubit2 r;
  // cos(t/2) I - i sin(t/2) (cos phi sx + sin phi sy)
  r << c, -kI * s * std::polar(1.0, -phi), -kI * s * std::polar(1.0, phi), c;
  return r;
}

ComplexMatrix cond_displacement(const FockSpace& fs, cplx alpha, double leak_max) {
  const int N = fs.dim();
  ComplexMatrix m = ComplexMatrix::Zero(2 * N, 2 * N);
  m.topLeftCorner(N, N) = displacement(fs, alpha / 2.0, leak_max);
  m.bottomRightCorner(N, N) = displacement(fs, -alpha / 2.0, leak_max);
  return m;
}

ComplexMatrix cond_parity(const FockSpace& fs) {
  const int N = fs.dim();
  ComplexMatrix m = ComplexMatrix::Identity(2 * N, 2 * N);
  m.bottomRightCorner(N, N) = fs.parity();
  return m;
}

ComplexMatrix selective_pi_pulse(const FockSpace& fs, int n) {
  const int N = fs.dim();
  if (n < 0 || n >= N) throw std::invalid_argument("selective_pi_pulse: n out of range");
  ComplexMatrix m = ComplexMatrix::Identity(2 * N, 2 * N);
  m(n, n) = 0.0;
  m(N + n, N + n) = 0.0;
  m(n, N + n) = 1.0;
  m(N + n, n) = 1.0;
  return m;
}

ComplexMatrix envelope_op(const FockSpace& fs, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("envelope_op: delta must be positive");
  const int N = fs.dim();
  ComplexMatrix m = ComplexMatrix::Zero(N, N);
  for (int k = 0; k < N; ++k) m(k, k) = std::exp(-delta * delta * k);
  return m;
}

ComplexMatrix squeeze(const FockSpace& fs, double r, double leak_max) {
  const ComplexMatrix a2 = fs.a() * fs.a();
  const ComplexMatrix S = matexp_reference((r / 2.0) * (a2 - a2.adjoint()));
  check_leak(top_population(S.col(0)), leak_max, "squeeze");
  return S;
}

ComplexMatrix qubit_op(const Qubit2& U, int N) {
  ComplexMatrix u(2, 2);
  u << U(0, 0), U(0, 1), U(1, 0), U(1, 1);
  return kron(u, identity(N));
}

ComplexMatrix osc_op(const ComplexMatrix& A) { return kron(identity(2), A); }

// ---- finite-duration SNAP pulse model ----

SnapPulseModel::SnapPulseModel(const PulseModelParams& params, int N) : params_(params), N_(N) {
  if (!(params.chi_tau > 0.0)) throw std::invalid_argument("SnapPulseModel: chi_tau must be positive");
  if (params.phi_levels < 1 || params.phi_levels > N) throw std::invalid_argument("SnapPulseModel: Phi outside [1, N]");
  const int count = N + params.phi_levels - 1;
  sin_d_.resize(count);
  cos_d_.resize(count);
  inv_d_.resize(count);
  for (int i = 0; i < count; ++i) {
    const int d = i - (N - 1);
    const double dt = 2.0 * kPi * params.chi_tau * d;
    sin_d_[i] = std::sin(dt);
    cos_d_[i] = std::cos(dt);
    inv_d_[i] = d == 0 ? 0.0 : 1.0 / dt;
  }
}

std::vector<Qubit2> SnapPulseModel::partial_blocks(const SnapPhases& phases) const {
  const int P = params_.phi_levels;
  if (phases.levels() != P) throw std::invalid_argument("SnapPulseModel: phase count differs from Phi");
  std::vector<double> sd(P), cd(P);
  for (int k = 0; k < P; ++k) {
    const double delta = kPi - phases.phases[k];
    sd[k] = std::sin(delta);
    cd[k] = std::cos(delta);
  }
  std::vector<Qubit2> out(N_);
  for (int n = 0; n < N_; ++n) {
    // Resonant rotation angle pi per component: exponent -i (pi/2) sum_k [S sx - C sy].
    double sx = 0.0, sy = 0.0;
    for (int k = 0; k < P; ++k) {
      const int i = k - n + (N_ - 1);
      double S, C;
      if (k == n) {
        S = cd[k];
        C = -sd[k];
      } else {
        S = (sin_d_[i] * cd[k] + cos_d_[i] * sd[k] - sd[k]) * inv_d_[i];
        C = (cos_d_[i] * cd[k] - sin_d_[i] * sd[k] - cd[k]) * inv_d_[i];
      }
      sx += S;
      sy -= C;
    }
    const double a = 0.5 * kPi * sx, b = 0.5 * kPi * sy;
    const double r = std::hypot(a, b);
    Qubit2 u;
    if (r == 0.0) {
      u.setIdentity();
    } else {
      const double c = std::cos(r), s = std::sin(r) / r;
      u << c, -kI * s * cplx(a, -b), -kI * s * cplx(a, b), c;
    }
    out[n] = u;
  }
  return out;
}

std::vector<Qubit2> SnapPulseModel::level_blocks(const SnapPhases& phases) const {
  auto blocks = partial_blocks(phases);
  const Qubit2 r0 = qubit_rotation(0.0, kPi);
  for (auto& b : blocks) b = b * r0;
  return blocks;
}

// ---- in-place application ----

void apply_displacement(const FockSpace& fs, cplx alpha, StateVector& joint, bool skip_e) {
  const int N = fs.dim();
  displace_block(fs, alpha, Eigen::Map<Eigen::MatrixXcd>(joint.data(), N, skip_e ? 1 : 2));
}

void apply_displacement_osc(const FockSpace& fs, cplx alpha, StateVector& psi) {
  displace_block(fs, alpha, Eigen::Map<Eigen::MatrixXcd>(psi.data(), fs.dim(), 1));
}

void apply_qubit(const Qubit2& U, StateVector& joint, int N) {
  for (int n = 0; n < N; ++n) {
    const cplx g = joint(n), e = joint(N + n);
    joint(n) = U(0, 0) * g + U(0, 1) * e;
    joint(N + n) = U(1, 0) * g + U(1, 1) * e;
  }
}

void apply_cond_displacement(const FockSpace& fs, cplx alpha, StateVector& joint) {
  const int N = fs.dim();
  displace_block(fs, alpha / 2.0, Eigen::Map<Eigen::MatrixXcd>(joint.data(), N, 1));
  displace_block(fs, -alpha / 2.0, Eigen::Map<Eigen::MatrixXcd>(joint.data() + N, N, 1));
}

void apply_cond_parity(StateVector& joint, int N) {
  for (int n = 1; n < N; n += 2) joint(N + n) = -joint(N + n);
}

void apply_selective_pi(StateVector& joint, int N, int n) {
  if (n < 0 || n >= N) throw std::invalid_argument("apply_selective_pi: n out of range");
  std::swap(joint(n), joint(N + n));
}

void apply_snap_ideal(const SnapPhases& phases, StateVector& joint, int N, bool skip_e) {
  for (int n = 0; n < phases.levels() && n < N; ++n) {
    const cplx ph = std::polar(1.0, phases.phases[n]);
    joint(n) *= ph;
    if (!skip_e) joint(N + n) *= ph;
  }
}

void apply_level_blocks(const std::vector<Qubit2>& blocks, StateVector& joint, int N) {
  for (int n = 0; n < N; ++n) {
    const cplx g = joint(n), e = joint(N + n);
    joint(n) = blocks[n](0, 0) * g + blocks[n](0, 1) * e;
    joint(N + n) = blocks[n](1, 0) * g + blocks[n](1, 1) * e;
  }
}

}  // namespace qrl
