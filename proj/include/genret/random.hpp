#pragma once

#include <cstdint>
#include <random>

namespace genret {

// All randomness flows from a seeded 64-bit Mersenne Twister. The draws
// below avoid the standard distributions, whose output is
// implementation-defined.
using Rng = std::mt19937_64;

// Uniform in [0, 1).
inline double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline bool bernoulli(Rng& rng, double p) { return uniform_unit(rng) < p; }

// Uniform in [0, n); n must be positive.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace genret
