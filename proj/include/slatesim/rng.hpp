// Seedable deterministic random source shared by simulation and training.
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

#include "slatesim/types.hpp"

namespace slatesim {

/// Wraps a 64-bit Mersenne twister. Every stochastic component takes one
/// of these explicitly, so a run is fully reproducible from its seed.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Uniform real in [0, 1).
  Real uniform() { return static_cast<Real>(engine_() >> 11) * 0x1.0p-53; }

  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  long uniform_int(long n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    return std::uniform_int_distribution<long>(0, n - 1)(engine_);
  }

  /// Standard normal draw.
  Real normal() { return normal_(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<Real> normal_{0.0, 1.0};
};

}  // namespace slatesim
