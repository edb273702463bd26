#pragma once

#include <cstdint>
#include <random>

namespace sirnet {

using Rng = std::mt19937_64;

// Distribution helpers built directly on the engine's output bits so that
// sequences are identical across standard library implementations.

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

__extension__ using uint128 = unsigned __int128;

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>((static_cast<uint128>(rng()) * n) >> 64);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

// splitmix64 finalizer; derives independent stream seeds from one base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace sirnet
