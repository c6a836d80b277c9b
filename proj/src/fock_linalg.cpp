#include "qrl/fock_linalg.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>

namespace qrl {

FockSpace::FockSpace(int N) : N_(N) {
  if (N < 2) throw std::invalid_argument("FockSpace: N must be >= 2, got " + std::to_string(N));
  a_ = ComplexMatrix::Zero(N, N);
  for (int k = 1; k < N; ++k) a_(k - 1, k) = std::sqrt(static_cast<double>(k));
  adag_ = a_.adjoint();
  n_ = ComplexMatrix::Zero(N, N);
  parity_ = ComplexMatrix::Zero(N, N);
  for (int k = 0; k < N; ++k) {
    n_(k, k) = static_cast<double>(k);
    parity_(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
  }
  const double s = 1.0 / std::sqrt(2.0);
  x_ = s * (a_ + adag_);
  p_ = (kI * s) * (adag_ - a_);
  x_eig_ = eig_hermitian(x_);
  p_eig_ = eig_hermitian(p_);
  ux_ = x_eig_.vectors;
  w_ = x_eig_.vectors.adjoint() * p_eig_.vectors;
  up_adj_ = p_eig_.vectors.adjoint();
}

FockSpacePtr build_fock_space(int N) {
  if (N < 2) throw std::invalid_argument("build_fock_space: N must be >= 2, got " + std::to_string(N));
  static std::mutex mu;
  static std::map<int, FockSpacePtr> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(N);
  if (it != cache.end()) return it->second;
  auto fs = std::make_shared<const FockSpace>(N);
  cache.emplace(N, fs);
  return fs;
}

ComplexMatrix matexp_reference(const ComplexMatrix& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("matexp_reference: matrix is not square");
  if (A.size() == 0) return A;
  const double scale = std::max(1.0, max_abs(A));
  if (max_abs(A + A.adjoint()) < 1e-13 * scale) {
    // A = -iH with H Hermitian.
    const ComplexMatrix H = kI * A;
    const ComplexMatrix Hh = 0.5 * (H + H.adjoint());
    const Eigensystem es = eig_hermitian(Hh);
    Eigen::VectorXcd ph(es.values.size());
    for (Eigen::Index k = 0; k < ph.size(); ++k) ph(k) = std::exp(-kI * es.values(k));
    return es.vectors * ph.asDiagonal() * es.vectors.adjoint();
  }
  const Eigen::MatrixXcd Ac = A;
  const Eigen::MatrixXcd E = Ac.exp();
  return E;
}

Eigensystem eig_hermitian(const ComplexMatrix& A, double tol) {
  if (A.rows() != A.cols()) throw std::invalid_argument("eig_hermitian: matrix is not square");
  const double dev = A.size() ? max_abs(A - A.adjoint()) : 0.0;
  if (dev > tol) {
    throw std::invalid_argument("eig_hermitian: input is not Hermitian (deviation " + std::to_string(dev) + ")");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(Eigen::MatrixXcd(A), Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eig_hermitian: solver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

ComplexMatrix kron(const ComplexMatrix& A, const ComplexMatrix& B) {
  return Eigen::kroneckerProduct(A, B).eval();
}

// ---- small helpers ----

ComplexMatrix identity(int n) { return ComplexMatrix::Identity(n, n); }

ComplexMatrix pauli_x() {
  ComplexMatrix m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}

ComplexMatrix pauli_y() {
  ComplexMatrix m(2, 2);
  m << 0.0, -kI, kI, 0.0;
  return m;
}

ComplexMatrix pauli_z() {
  ComplexMatrix m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}

StateVector basis_state(int dim, int k) {
  if (k < 0 || k >= dim) throw std::invalid_argument("basis_state: index out of range");
  StateVector v = StateVector::Zero(dim);
  v(k) = 1.0;
  return v;
}

StateVector joint_state(int q, const StateVector& psi) {
  const auto N = psi.size();
  StateVector s = StateVector::Zero(2 * N);
  s.segment(q * N, N) = psi;
  return s;
}

double max_abs(const ComplexMatrix& A) { return A.size() ? A.cwiseAbs().maxCoeff() : 0.0; }

double unitarity_defect(const ComplexMatrix& U, int block) {
  if (block <= 0) return 0.0;
  const ComplexMatrix G = U.adjoint() * U;
  return max_abs(G.topLeftCorner(block, block) - ComplexMatrix::Identity(block, block));
}

int guarded_block(int N, double abs_alpha) {
  return N - static_cast<int>(std::ceil(4.0 * abs_alpha * std::sqrt(static_cast<double>(N))));
}

double poisson_tail(double lambda, int N) {
  if (lambda <= 0.0) return 0.0;
  return boost::math::gamma_p(static_cast<double>(N), lambda);
}

double top_population(const StateVector& psi) {
  const auto N = psi.size();
  const auto m = std::max<Eigen::Index>(1, N / 20);
  return psi.tail(m).squaredNorm();
}

double top_population_joint(const StateVector& joint, int N) {
  return top_population(joint.head(N)) + top_population(joint.tail(N));
}

namespace {

// Calls visit(m, n, <m|D|n>) for every m, n < N.
// For k >= 0: <n+k|D|n> = e^{ik theta} f_n and <n|D|n+k> = (-1)^k e^{-ik theta} f_n with
// f_n = e^{-x/2} |alpha|^k sqrt(n!/(n+k)!) L_n^{(k)}(x), x = |alpha|^2, |f_n| <= 1.
template <class Visit>
void visit_displacement_elements(int N, cplx alpha, Visit&& visit) {
  const double r = std::abs(alpha);
  if (r == 0.0) {
    for (int n = 0; n < N; ++n) visit(n, n, cplx(1.0, 0.0));
    return;
  }
  const double x = r * r;
  const double theta = std::arg(alpha);
  const double log_r = std::log(r);
  std::vector<double> f(N);
  for (int k = 0; k < N; ++k) {
    const int len = N - k;
    f[0] = std::exp(-0.5 * x + k * log_r - 0.5 * std::lgamma(k + 1.0));
    if (len > 1) f[1] = (1.0 + k - x) * f[0] / std::sqrt(1.0 + k);
    for (int n = 1; n + 1 < len; ++n) {
      f[n + 1] = ((2.0 * n + 1.0 + k - x) * f[n] - std::sqrt(static_cast<double>(n) * (n + k)) * f[n - 1]) /
                 std::sqrt((n + 1.0) * (n + k + 1.0));
    }
    const cplx lower = std::polar(1.0, k * theta);
    const cplx upper = (k % 2 == 0 ? 1.0 : -1.0) * std::conj(lower);
    for (int n = 0; n < len; ++n) {
      visit(n + k, n, lower * f[n]);
      if (k > 0) visit(n, n + k, upper * f[n]);
    }
  }
}

}  // namespace

ComplexMatrix displacement_elements(int N, cplx alpha) {
  ComplexMatrix d = ComplexMatrix::Zero(N, N);
  visit_displacement_elements(N, alpha, [&](int m, int n, cplx v) { d(m, n) = v; });
  return d;
}

cplx displacement_form(const StateVector& u, const StateVector& v, cplx alpha) {
  if (u.size() != v.size()) throw std::invalid_argument("displacement_form: dimension mismatch");
  cplx acc = 0.0;
  visit_displacement_elements(static_cast<int>(u.size()), alpha,
                              [&](int m, int n, cplx d) { acc += std::conj(u(m)) * d * v(n); });
  return acc;
}

}  // namespace qrl
