#pragma once

#include <cstdint>
#include <random>

namespace fine {

using Rng = std::mt19937_64;

// splitmix64 finalizer; derives independent sub-seeds from one experiment seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Standard normal truncated to [-bound, bound] by rejection.
inline double truncated_normal(Rng &rng, double bound)
{
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    const double v = n(rng);
    if (v >= -bound && v <= bound) {
      return v;
    }
  }
}

inline double uniform(Rng &rng, double lo, double hi)
{
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

} // namespace fine
