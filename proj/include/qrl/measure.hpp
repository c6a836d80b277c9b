#pragma once
// Random streams and projective qubit measurement on joint states.

#include "qrl/fock_linalg.hpp"

#include <cstdint>
#include <random>
#include <utility>

namespace qrl {

// SplitMix64 finaliser; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return uniform_(engine_); }
  double normal() { return normal_(engine_); }
  std::uint64_t next() { return engine_(); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Probability of outcome +1 (qubit in |g>).
double prob_ground(const StateVector& joint, int N);

// Samples sigma_z and collapses in place; returns +1 for |g>, -1 for |e>. Always draws one
// uniform so streams stay aligned. Throws std::domain_error if |norm^2 - 1| > 1e-6.
int measure_qubit(StateVector& joint, int N, Rng& rng);
std::pair<int, StateVector> born_measure(const StateVector& joint, int N, Rng& rng);

// Classical flip conditioned on the outcome: leaves the qubit in |g>.
void reset_to_ground(StateVector& joint, int N, int outcome);

}  // namespace qrl
