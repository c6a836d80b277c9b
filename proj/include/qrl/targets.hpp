#pragma once
// Target states, phase-space functions, fidelity metrics and estimator analysis.

#include "qrl/fock_linalg.hpp"

#include <string>
#include <utility>
#include <vector>

namespace qrl {

enum class TargetKind { fock, coherent, cat, binomial, gkp1d, gkp_logical };

struct TargetSpec {
  TargetKind kind = TargetKind::fock;
  int n = 0;                                    // fock
  cplx beta{0.0, 0.0};                          // coherent, cat
  int parity_sign = +1;                         // cat
  std::vector<std::pair<int, cplx>> levels;     // binomial: (Fock level, coefficient)
  double delta = 0.35;                          // gkp
  std::string label = "+Z";                     // gkp_logical cardinal: +Z -Z +X -X +Y -Y

  static TargetSpec fock(int n);
  static TargetSpec coherent(cplx beta);
  static TargetSpec cat(cplx beta, int parity_sign);
  static TargetSpec binomial(std::vector<std::pair<int, cplx>> levels);
  static TargetSpec gkp1d(double delta);
  static TargetSpec gkp_logical(double delta, std::string label);
};

// Throws std::domain_error when the state does not fit at fs.dim() within leak_max.
StateVector make_target(const TargetSpec& spec, const FockSpace& fs, double leak_max = 1e-6);

// Finite-energy grid state e^{-D^2 n} sum_t |x = x0 + t*s>, normalised, at dimension N.
// The sum is evaluated in a 3N auxiliary space; `leak` receives the norm lost on truncation.
StateVector gkp_comb(int N, double delta, double spacing, double x0, double* leak = nullptr);

// Oscillator branches of a logical qubit encoding.
struct CodeWords {
  StateVector zero, one;
};
CodeWords fock_code(int N);
CodeWords gkp_code(int N, double delta, double* leak = nullptr);
// Cardinal states in the order +X, -X, +Y, -Y, +Z, -Z.
std::vector<StateVector> cardinal_states(const CodeWords& code);
std::vector<std::string> cardinal_labels();
// U applied to the logical amplitudes of each cardinal state.
std::vector<StateVector> rotated_cardinals(const CodeWords& code, const Eigen::Matrix2cd& U);

// ---- point-wise phase-space functions (BCH displacement, leak-guarded) ----

double wigner(const FockSpace& fs, const StateVector& psi, cplx alpha, double leak_max = 1e-6);
cplx char_fn(const FockSpace& fs, const StateVector& psi, cplx alpha, double leak_max = 1e-6);

// Exact-element versions used for tables: no truncation of the displaced state.
double wigner_exact(const StateVector& psi, cplx alpha);
cplx char_fn_exact(const StateVector& psi, cplx alpha);

// ---- fidelity ----

double fidelity(const StateVector& psi, const StateVector& phi);
// <t| rho_osc |t> for a pure joint state.
double reduced_fidelity(const StateVector& joint, const StateVector& target);

struct Branch {
  double probability = 0.0;
  StateVector state;  // joint
};

// Mean over inputs of sum_h p_h |<target_i|psi_h>|^2 (reduced to the oscillator).
double avg_gate_fidelity(const std::vector<std::vector<Branch>>& outputs,
                         const std::vector<StateVector>& targets);

// ---- tables ----

// Values on the M x M grid alpha = x_j + i y_i, x, y in linspace(-L, L, M); index i*M + j.
struct PhaseTable {
  double L = 0.0;
  int M = 0;
  std::vector<double> values;
  double max_abs = 0.0;
  double norm_abs = 0.0;  // Riemann sum of |value|
  double sum = 0.0;       // Riemann sum of value

  double step() const { return 2.0 * L / (M - 1); }
  double cell_area() const { return step() * step(); }
  cplx point(std::size_t idx) const;
};

struct WignerTable : PhaseTable {
  double delta() const { return norm_abs - 1.0; }
};

double default_wigner_extent(const StateVector& psi);
// Throws std::domain_error when the Riemann sum of W misses 1 by more than 0.01.
WignerTable wigner_table(const FockSpace& fs, const StateVector& psi, double L, int M = 201);
// Real part of the characteristic function; throws when the imaginary part is not negligible.
PhaseTable char_table(const FockSpace& fs, const StateVector& psi, double L, int M = 201);

// pi * sum W_psi W_phi dA.
double wigner_overlap(const WignerTable& a, const WignerTable& b);

void write_table_csv(const PhaseTable& t, const std::string& path);

// ---- estimator analysis ----

double sample_bound(double delta_target, double F);
double projector_sample_bound(double F);
double estimator_variance(const WignerTable& target, double F);
double estimator_variance(double delta_target, double F);

}  // namespace qrl
