#pragma once
// Reward circuits. Every circuit except the bare qubit readout starts by measuring the
// qubit (m1) and resetting it to |g>, which disentangles it from the oscillator.

#include "qrl/fock_linalg.hpp"
#include "qrl/measure.hpp"
#include "qrl/targets.hpp"

#include <memory>
#include <string>
#include <vector>

namespace qrl {

struct RewardOutcome {
  double reward = 0.0;
  int m1 = +1;
  int m2 = +1;
  char direction = 0;          // 'x' or 'p' for the stabilizer reward
  std::vector<cplx> alphas;    // phase-space probes, one per point
  std::vector<int> outcomes;   // probe outcomes m, one per point
};

class RewardScheme {
 public:
  virtual ~RewardScheme() = default;
  virtual std::string name() const = 0;
  // One reward draw on a copy of the final joint state.
  virtual RewardOutcome sample(const StateVector& joint, Rng& rng) const = 0;
  // Exact E[R] for this joint state; consumes no randomness.
  virtual double expected(const StateVector& joint) const = 0;
  // Reward circuits executed per episode (the number of phase-space points).
  virtual int shots_per_episode() const { return 1; }
};

using RewardPtr = std::shared_ptr<const RewardScheme>;

// R = -m2 after a selective pi pulse on level n.
RewardPtr make_fock_reward(FockSpacePtr fs, int n);
// R = +1 with probability |<target|psi>|^2 after disentangling.
RewardPtr make_target_projector_reward(StateVector target);
// Finite-energy stabilizer probe of a random quadrature; R = m2.
RewardPtr make_gkp_reward(FockSpacePtr fs, double delta);
// R = mean over points of m * sgn W_target(alpha), alpha ~ |W_target|.
RewardPtr make_wigner_reward(FockSpacePtr fs, WignerTable target, int points = 1);
// R = mean over points of m * sgn C_target(alpha), alpha ~ |C_target|.
RewardPtr make_char_reward(FockSpacePtr fs, PhaseTable target, int points = 1);
// R = -m on the bare qubit (no disentangling step).
RewardPtr make_qubit_excitation_reward(int N);

// Constants relating the schemes' expectations to fidelity.
inline double wigner_reward_scale(const WignerTable& t) { return 1.0 / (2.0 * t.norm_abs); }
inline double char_reward_scale(const PhaseTable& t) { return kPi / t.norm_abs; }

// Draws table indices with probability proportional to |value| by rejection against the box.
class PhaseSpaceSampler {
 public:
  explicit PhaseSpaceSampler(const PhaseTable& table, int max_attempts = 10000);
  std::size_t draw(Rng& rng) const;
  const PhaseTable& table() const { return table_; }

 private:
  PhaseTable table_;
  int max_attempts_;
};

// Individual circuit pieces, exposed for tests.
int disentangle(StateVector& joint, int N, Rng& rng);
// The stabilizer circuit (without the disentangling prelude) on an oscillator state.
// Returns P(m2 = +1).
double gkp_probe_ground_probability(const FockSpace& fs, const StateVector& psi, double delta, char direction);
// Same circuit applied in place to a joint state with the qubit in |g>.
void apply_gkp_probe(const FockSpace& fs, StateVector& joint, double delta, char direction);

void write_samples_csv(const std::vector<RewardOutcome>& outcomes, const std::string& path);

}  // namespace qrl
