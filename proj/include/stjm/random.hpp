#pragma once

// Seeding and portable uniform draws. Distribution objects from <random>
// other than the engines are implementation-defined, so index and unit
// draws that feed model decisions are computed from raw engine output.

#include <cstddef>
#include <cstdint>
#include <random>

namespace stjm {

using Rng = std::mt19937_64;

/// Deterministic child seed for a (parent, stream) pair (splitmix64 mix).
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) {
  std::uint64_t z = parent + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform in {0, ..., n-1}; n must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  return i < n ? i : n - 1;
}

}  // namespace stjm
