#pragma once
// Gate constructors for the control and reward circuits.
//
// Matrix constructors return full operators and serve the API and the tests. The
// apply_* functions act in place on joint states and are what the simulator runs.

#include "qrl/fock_linalg.hpp"

#include <vector>

namespace qrl {

using Qubit2 = Eigen::Matrix2cd;

// Phases phi_n for n < Phi; phi_n = 0 above. Entries are reduced to (-pi, pi].
struct SnapPhases {
  std::vector<double> phases;

  SnapPhases() = default;
  explicit SnapPhases(std::vector<double> p);
  int levels() const { return static_cast<int>(phases.size()); }
};

double reduce_phase(double phi);

struct PulseModelParams {
  double chi_tau = 0.0;
  int phi_levels = 0;
};

// ---- operator constructors ----

// BCH product Ux e^{i sqrt2 Im(a) x} Ux^dag Up e^{-i sqrt2 Re(a) p} Up^dag e^{-i Im(a) Re(a)}.
// Throws std::domain_error when the coherent-state tail P(Poisson(|a|^2) >= N) exceeds leak_max.
ComplexMatrix displacement(const FockSpace& fs, cplx alpha, double leak_max = 1e-6);
ComplexMatrix snap_ideal(const SnapPhases& phases, const FockSpace& fs);
// Joint operator U_partial(phi) (I (x) R_0(pi)); qubit-major ordering.
ComplexMatrix snap_finite(const SnapPhases& phases, const PulseModelParams& params, const FockSpace& fs);
Qubit2 qubit_rotation(double phi, double theta);
ComplexMatrix cond_displacement(const FockSpace& fs, cplx alpha, double leak_max = 1e-6);
ComplexMatrix cond_parity(const FockSpace& fs);
ComplexMatrix selective_pi_pulse(const FockSpace& fs, int n);
ComplexMatrix envelope_op(const FockSpace& fs, double delta);
ComplexMatrix squeeze(const FockSpace& fs, double r, double leak_max = 1e-6);
// Lifts a qubit operator to the joint space.
ComplexMatrix qubit_op(const Qubit2& U, int N);
// Lifts an oscillator operator to the joint space.
ComplexMatrix osc_op(const ComplexMatrix& A);

// ---- finite-duration SNAP pulse model ----

// Per-level 2x2 blocks of snap_finite, with the trig of the detunings cached per (k - n).
class SnapPulseModel {
 public:
  SnapPulseModel(const PulseModelParams& params, int N);

  // blocks[n] acts on (g_n, e_n); includes the leading perfect R_0(pi).
  std::vector<Qubit2> level_blocks(const SnapPhases& phases) const;
  // The rotation U_partial alone, without R_0(pi).
  std::vector<Qubit2> partial_blocks(const SnapPhases& phases) const;

  const PulseModelParams& params() const { return params_; }
  int dim() const { return N_; }

 private:
  PulseModelParams params_;
  int N_;
  // Indexed by d + (N - 1) for d = k - n in [-(N-1), Phi-1].
  std::vector<double> sin_d_, cos_d_, inv_d_;
};

// ---- in-place application on joint states (length 2N) ----

// Displaces the g branch, and the e branch unless skip_e is set (caller knows it is zero).
void apply_displacement(const FockSpace& fs, cplx alpha, StateVector& joint, bool skip_e = false);
void apply_displacement_osc(const FockSpace& fs, cplx alpha, StateVector& psi);
void apply_qubit(const Qubit2& U, StateVector& joint, int N);
void apply_cond_displacement(const FockSpace& fs, cplx alpha, StateVector& joint);
void apply_cond_parity(StateVector& joint, int N);
void apply_selective_pi(StateVector& joint, int N, int n);
void apply_snap_ideal(const SnapPhases& phases, StateVector& joint, int N, bool skip_e = false);
void apply_level_blocks(const std::vector<Qubit2>& blocks, StateVector& joint, int N);

}  // namespace qrl
