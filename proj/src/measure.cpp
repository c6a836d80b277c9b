#include "qrl/measure.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qrl {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(mix64(base) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

double prob_ground(const StateVector& joint, int N) { return joint.head(N).squaredNorm(); }

int measure_qubit(StateVector& joint, int N, Rng& rng) {
  const double pg = joint.head(N).squaredNorm();
  const double pe = joint.tail(N).squaredNorm();
  const double norm2 = pg + pe;
  if (std::abs(norm2 - 1.0) > 1e-6) {
    throw std::domain_error("measure_qubit: state norm^2 = " + std::to_string(norm2));
  }
  const double u = rng.uniform();
  if (u < pg / norm2) {
    joint.tail(N).setZero();
    joint.head(N) /= std::sqrt(pg);
    return +1;
  }
  joint.head(N).setZero();
  joint.tail(N) /= std::sqrt(pe);
  return -1;
}

std::pair<int, StateVector> born_measure(const StateVector& joint, int N, Rng& rng) {
  StateVector s = joint;
  const int m = measure_qubit(s, N, rng);
  return {m, std::move(s)};
}

void reset_to_ground(StateVector& joint, int N, int outcome) {
  if (outcome == -1) {
    joint.head(N).swap(joint.tail(N));
  }
}

}  // namespace qrl
