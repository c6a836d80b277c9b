#pragma once
// Dense complex linear algebra and the cached truncated Fock-space operator set.
//
// Joint qubit (x) oscillator vectors use index q*N + n with q = 0 for |g> and
// q = 1 for |e>, so a joint state is an N x 2 column-major block [g | e].

#include <Eigen/Dense>

#include <complex>
#include <memory>
#include <vector>

namespace qrl {

using cplx = std::complex<double>;
using ComplexMatrix =
    Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StateVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

struct Eigensystem {
  RealVector values;     // ascending
  ComplexMatrix vectors; // columns are eigenvectors
};

class FockSpace {
 public:
  explicit FockSpace(int N);

  int dim() const { return N_; }

  const ComplexMatrix& a() const { return a_; }
  const ComplexMatrix& adag() const { return adag_; }
  const ComplexMatrix& n_op() const { return n_; }
  const ComplexMatrix& x_op() const { return x_; }
  const ComplexMatrix& p_op() const { return p_; }
  const ComplexMatrix& parity() const { return parity_; }
  const Eigensystem& x_eig() const { return x_eig_; }
  const Eigensystem& p_eig() const { return p_eig_; }

  // Column-major kernels for the BCH displacement: D = Ux e^{i..x} W e^{-i..p} Up^dag.
  const Eigen::MatrixXcd& ux() const { return ux_; }
  const Eigen::MatrixXcd& w() const { return w_; }
  const Eigen::MatrixXcd& up_adj() const { return up_adj_; }

 private:
  int N_;
  ComplexMatrix a_, adag_, n_, x_, p_, parity_;
  Eigensystem x_eig_, p_eig_;
  Eigen::MatrixXcd ux_, w_, up_adj_;
};

using FockSpacePtr = std::shared_ptr<const FockSpace>;

// Builds (and memoises per N) the operator set. Throws std::invalid_argument for N < 2.
FockSpacePtr build_fock_space(int N);

ComplexMatrix matexp_reference(const ComplexMatrix& A);
Eigensystem eig_hermitian(const ComplexMatrix& A, double tol = 1e-8);
ComplexMatrix kron(const ComplexMatrix& A, const ComplexMatrix& B);

// ---- small helpers ----

ComplexMatrix identity(int n);
ComplexMatrix pauli_x();
ComplexMatrix pauli_y();
ComplexMatrix pauli_z();

StateVector basis_state(int dim, int k);
// |q> (x) psi for q in {0 (g), 1 (e)}.
StateVector joint_state(int q, const StateVector& psi);
// Oscillator amplitudes of the q-th qubit branch of a joint state.
inline auto branch(StateVector& s, int q, int N) { return s.segment(q * N, N); }
inline auto branch(const StateVector& s, int q, int N) { return s.segment(q * N, N); }

double max_abs(const ComplexMatrix& A);
// max |U^dag U - I| restricted to indices [0, block) of a square matrix.
double unitarity_defect(const ComplexMatrix& U, int block);
// Fock indices <= N - ceil(4|alpha| sqrt N) are unaffected by truncation of D(alpha).
int guarded_block(int N, double abs_alpha);

// P(Poisson(lambda) >= N): the norm a coherent state of mean lambda loses at dimension N.
double poisson_tail(double lambda, int N);
// Population in the top max(1, N/20) Fock levels of an oscillator vector.
double top_population(const StateVector& psi);
// Same over both qubit branches of a joint state.
double top_population_joint(const StateVector& joint, int N);

// Exact <m|D(alpha)|n> for m, n < N, evaluated in the untruncated space through the
// associated-Laguerre recurrence. Independent of any truncated operator.
ComplexMatrix displacement_elements(int N, cplx alpha);
// u^dag D(alpha) v with the same exact elements, without forming the matrix.
cplx displacement_form(const StateVector& u, const StateVector& v, cplx alpha);

}  // namespace qrl
