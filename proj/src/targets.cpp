#include "qrl/targets.hpp"

#include "qrl/gates.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace qrl {

TargetSpec TargetSpec::fock(int n) {
  TargetSpec s;
  s.kind = TargetKind::fock;
  s.n = n;
  return s;
}

TargetSpec TargetSpec::coherent(cplx beta) {
  TargetSpec s;
  s.kind = TargetKind::coherent;
  s.beta = beta;
  return s;
}

TargetSpec TargetSpec::cat(cplx beta, int parity_sign) {
  TargetSpec s;
  s.kind = TargetKind::cat;
  s.beta = beta;
  s.parity_sign = parity_sign >= 0 ? +1 : -1;
  return s;
}

TargetSpec TargetSpec::binomial(std::vector<std::pair<int, cplx>> levels) {
  TargetSpec s;
  s.kind = TargetKind::binomial;
  s.levels = std::move(levels);
  return s;
}

TargetSpec TargetSpec::gkp1d(double delta) {
  TargetSpec s;
  s.kind = TargetKind::gkp1d;
  s.delta = delta;
  return s;
}

TargetSpec TargetSpec::gkp_logical(double delta, std::string label) {
  TargetSpec s;
  s.kind = TargetKind::gkp_logical;
  s.delta = delta;
  s.label = std::move(label);
  return s;
}

namespace {

void check_leak(double leak, double leak_max, const char* what) {
  if (leak > leak_max) {
    throw std::domain_error(std::string(what) + ": truncation leak " + std::to_string(leak) + " exceeds " +
                            std::to_string(leak_max));
  }
}

StateVector coherent_amplitudes(int N, cplx beta) {
  StateVector v(N);
  v(0) = std::exp(-0.5 * std::norm(beta));
  for (int k = 1; k < N; ++k) v(k) = v(k - 1) * beta / std::sqrt(static_cast<double>(k));
  return v;
}

int cardinal_index(const std::string& label) {
  const auto labels = cardinal_labels();
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<int>(i);
  throw std::invalid_argument("unknown cardinal label '" + label + "'");
}

}  // namespace

StateVector gkp_comb(int N, double delta, double spacing, double x0, double* leak) {
  if (!(delta > 0.0)) throw std::invalid_argument("gkp_comb: delta must be positive");
  const int Nb = 3 * N;
  const int K = static_cast<int>(std::ceil(std::sqrt(2.0 * Nb + 1.0) / spacing)) + 2;
  StateVector c = StateVector::Zero(Nb);
  std::vector<double> h(Nb);
  for (int t = -K; t <= K; ++t) {
    const double x = x0 + t * spacing;
    // Hermite functions psi_n(x) by the normalised three-term recurrence.
    h[0] = std::pow(kPi, -0.25) * std::exp(-0.5 * x * x);
    if (Nb > 1) h[1] = std::sqrt(2.0) * x * h[0];
    for (int n = 1; n + 1 < Nb; ++n)
      h[n + 1] = std::sqrt(2.0 / (n + 1)) * x * h[n] - std::sqrt(static_cast<double>(n) / (n + 1)) * h[n - 1];
    for (int n = 0; n < Nb; ++n) c(n) += h[n];
  }
  for (int n = 0; n < Nb; ++n) c(n) *= std::exp(-delta * delta * n);
  c.normalize();
  const double lost = c.tail(Nb - N).squaredNorm();
  if (leak) *leak = lost;
  StateVector psi = c.head(N);
  psi.normalize();
  return psi;
}

CodeWords fock_code(int N) { return {basis_state(N, 0), basis_state(N, 1)}; }

CodeWords gkp_code(int N, double delta, double* leak) {
  const double s = 2.0 * std::sqrt(kPi);
  double l0 = 0.0, l1 = 0.0;
  CodeWords code{gkp_comb(N, delta, s, 0.0, &l0), gkp_comb(N, delta, s, std::sqrt(kPi), &l1)};
  if (leak) *leak = std::max(l0, l1);
  return code;
}

std::vector<std::string> cardinal_labels() { return {"+X", "-X", "+Y", "-Y", "+Z", "-Z"}; }

std::vector<StateVector> rotated_cardinals(const CodeWords& code, const Eigen::Matrix2cd& U) {
  const double r = 1.0 / std::sqrt(2.0);
  const std::vector<Eigen::Vector2cd> logical = {
      Eigen::Vector2cd(r, r),        Eigen::Vector2cd(r, -r),        Eigen::Vector2cd(r, kI * r),
      Eigen::Vector2cd(r, -kI * r), Eigen::Vector2cd(1.0, 0.0), Eigen::Vector2cd(0.0, 1.0)};
  std::vector<StateVector> out;
  out.reserve(logical.size());
  for (const auto& v : logical) {
    const Eigen::Vector2cd w = U * v;
    StateVector psi = w(0) * code.zero + w(1) * code.one;
    psi.normalize();
    out.push_back(std::move(psi));
  }
  return out;
}

std::vector<StateVector> cardinal_states(const CodeWords& code) {
  return rotated_cardinals(code, Eigen::Matrix2cd::Identity());
}

StateVector make_target(const TargetSpec& spec, const FockSpace& fs, double leak_max) {
  const int N = fs.dim();
  switch (spec.kind) {
    case TargetKind::fock:
      if (spec.n < 0 || spec.n >= N) throw std::domain_error("make_target: Fock level outside the space");
      return basis_state(N, spec.n);
    case TargetKind::coherent: {
      check_leak(poisson_tail(std::norm(spec.beta), N), leak_max, "make_target(coherent)");
      StateVector v = coherent_amplitudes(N, spec.beta);
      v.normalize();
      return v;
    }
    case TargetKind::cat: {
      check_leak(poisson_tail(std::norm(spec.beta), N), leak_max, "make_target(cat)");
      StateVector v = coherent_amplitudes(N, spec.beta) +
                      static_cast<double>(spec.parity_sign) * coherent_amplitudes(N, -spec.beta);
      v.normalize();
      return v;
    }
    case TargetKind::binomial: {
      StateVector v = StateVector::Zero(N);
      for (const auto& [level, c] : spec.levels) {
        if (level < 0 || level >= N) throw std::domain_error("make_target: binomial level outside the space");
        v(level) += c;
      }
      if (v.norm() == 0.0) throw std::invalid_argument("make_target: empty binomial superposition");
      v.normalize();
      return v;
    }
    case TargetKind::gkp1d: {
      double leak = 0.0;
      StateVector v = gkp_comb(N, spec.delta, std::sqrt(2.0 * kPi), 0.0, &leak);
      check_leak(leak, leak_max, "make_target(gkp1d)");
      return v;
    }
    case TargetKind::gkp_logical: {
      const int idx = cardinal_index(spec.label);
      double leak = 0.0;
      const CodeWords code = gkp_code(N, spec.delta, &leak);
      check_leak(leak, leak_max, "make_target(gkp_logical)");
      return cardinal_states(code)[idx];
    }
  }
  throw std::invalid_argument("make_target: unknown kind");
}

// ---- point-wise phase-space functions ----

double wigner(const FockSpace& fs, const StateVector& psi, cplx alpha, double leak_max) {
  StateVector phi = psi;
  apply_displacement_osc(fs, -alpha, phi);
  check_leak(top_population(phi), leak_max, "wigner");
  double par = 0.0;
  for (Eigen::Index k = 0; k < phi.size(); ++k) par += (k % 2 == 0 ? 1.0 : -1.0) * std::norm(phi(k));
  return 2.0 / kPi * par;
}

cplx char_fn(const FockSpace& fs, const StateVector& psi, cplx alpha, double leak_max) {
  StateVector phi = psi;
  apply_displacement_osc(fs, alpha, phi);
  check_leak(top_population(phi), leak_max, "char_fn");
  return psi.dot(phi);
}

double wigner_exact(const StateVector& psi, cplx alpha) {
  // D(a) Pi D(a)^dag = D(2a) Pi.
  StateVector v = psi;
  for (Eigen::Index k = 1; k < v.size(); k += 2) v(k) = -v(k);
  return 2.0 / kPi * displacement_form(psi, v, 2.0 * alpha).real();
}

cplx char_fn_exact(const StateVector& psi, cplx alpha) { return displacement_form(psi, psi, alpha); }

// ---- fidelity ----

double fidelity(const StateVector& psi, const StateVector& phi) {
  if (psi.size() != phi.size()) throw std::invalid_argument("fidelity: dimension mismatch");
  return std::min(1.0, std::norm(psi.dot(phi)));
}

double reduced_fidelity(const StateVector& joint, const StateVector& target) {
  const auto N = target.size();
  if (joint.size() != 2 * N) throw std::invalid_argument("reduced_fidelity: dimension mismatch");
  return std::min(1.0, std::norm(target.dot(joint.head(N))) + std::norm(target.dot(joint.tail(N))));
}

double avg_gate_fidelity(const std::vector<std::vector<Branch>>& outputs, const std::vector<StateVector>& targets) {
  if (outputs.size() != 6 || targets.size() != 6) throw std::invalid_argument("avg_gate_fidelity: need 6 cardinal states");
  double total = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    for (const auto& b : outputs[i]) total += b.probability * reduced_fidelity(b.state, targets[i]);
  }
  return total / 6.0;
}

// ---- tables ----

cplx PhaseTable::point(std::size_t idx) const {
  const auto i = static_cast<int>(idx / M), j = static_cast<int>(idx % M);
  return {-L + j * step(), -L + i * step()};
}

double default_wigner_extent(const StateVector& psi) {
  double n = 0.0;
  for (Eigen::Index k = 0; k < psi.size(); ++k) n += k * std::norm(psi(k));
  return std::max(4.0, std::sqrt(2.0 * n) + 3.0);
}

namespace {

template <class F>
void fill_table(PhaseTable& t, double L, int M, F&& value) {
  if (M < 3 || !(L > 0.0)) throw std::invalid_argument("table: need L > 0 and M >= 3");
  t.L = L;
  t.M = M;
  t.values.resize(static_cast<std::size_t>(M) * M);
  for (std::size_t idx = 0; idx < t.values.size(); ++idx) t.values[idx] = value(t.point(idx));
  t.max_abs = 0.0;
  double s = 0.0, a = 0.0;
  for (double v : t.values) {
    t.max_abs = std::max(t.max_abs, std::abs(v));
    s += v;
    a += std::abs(v);
  }
  t.sum = s * t.cell_area();
  t.norm_abs = a * t.cell_area();
}

}  // namespace

WignerTable wigner_table(const FockSpace& fs, const StateVector& psi, double L, int M) {
  if (psi.size() != fs.dim()) throw std::invalid_argument("wigner_table: dimension mismatch");
  WignerTable t;
  fill_table(t, L, M, [&](cplx a) { return wigner_exact(psi, a); });
  if (std::abs(t.sum - 1.0) > 0.01) {
    throw std::domain_error("wigner_table: Wigner function integrates to " + std::to_string(t.sum) +
                            " on the box; support leaks beyond L = " + std::to_string(L));
  }
  return t;
}

PhaseTable char_table(const FockSpace& fs, const StateVector& psi, double L, int M) {
  if (psi.size() != fs.dim()) throw std::invalid_argument("char_table: dimension mismatch");
  PhaseTable t;
  double max_im = 0.0;
  fill_table(t, L, M, [&](cplx a) {
    const cplx c = char_fn_exact(psi, a);
    max_im = std::max(max_im, std::abs(c.imag()));
    return c.real();
  });
  if (max_im > 1e-8 * std::max(1.0, t.max_abs)) {
    throw std::domain_error("char_table: characteristic function is complex (max |Im| = " + std::to_string(max_im) + ")");
  }
  return t;
}

double wigner_overlap(const WignerTable& a, const WignerTable& b) {
  if (a.M != b.M || a.L != b.L) throw std::invalid_argument("wigner_overlap: grids differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
  return kPi * s * a.cell_area();
}

void write_table_csv(const PhaseTable& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_table_csv: cannot open " + path);
  out << "alpha_re,alpha_im,value\n";
  out.precision(12);
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    const cplx a = t.point(i);
    out << a.real() << ',' << a.imag() << ',' << t.values[i] << '\n';
  }
}

// ---- estimator analysis ----

double sample_bound(double delta_target, double F) {
  if (!(F < 1.0)) throw std::domain_error("sample_bound: F must be < 1");
  if (F < 0.0) throw std::domain_error("sample_bound: F must be >= 0");
  const double n = 1.0 + delta_target;
  return (4.0 * n * n - F * F) / ((1.0 - F) * (1.0 - F));
}

double projector_sample_bound(double F) {
  if (!(F < 1.0) || F < 0.0) throw std::domain_error("projector_sample_bound: F must be in [0, 1)");
  return F / (1.0 - F);
}

double estimator_variance(double delta_target, double F) {
  if (F < 0.0 || F > 1.0) throw std::domain_error("estimator_variance: F must be in [0, 1]");
  const double n = 1.0 + delta_target;
  return 4.0 * n * n - F * F;
}

double estimator_variance(const WignerTable& target, double F) { return estimator_variance(target.delta(), F); }

}  // namespace qrl
