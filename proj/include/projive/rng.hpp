#pragma once

// Seeding and draw conventions used across the simulation harness and the
// randomized initializer. All determinism contracts ("same seed, same
// output") refer to repeated runs of the same build; draws go through
// std::mt19937_64 with the standard-library distributions.
//
// Seed splitting uses the splitmix64 finaliser so that replicate/cell/
// candidate streams derived from one base seed are decorrelated and do not
// depend on evaluation order.

#include "projive/types.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace projive {

/// splitmix64 finalising mix of one 64-bit word.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Child seed for stream `index` under `base`.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return mix64(base ^ mix64(index));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(base, a), b);
}

/// FNV-1a hash of a string; used to key seeds on content (e.g. a rank
/// combination) instead of list position.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

using RngEngine = std::mt19937_64;

inline RngEngine make_engine(std::uint64_t seed) { return RngEngine(seed); }

/// Fills column-major with independent N(0,1) draws.
inline void fill_standard_normal(Matrix& m, RngEngine& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = normal(rng);
  }
}

/// Fills column-major with independent draws uniform on {-1, +1}.
inline void fill_rademacher(Matrix& m, RngEngine& rng) {
  std::bernoulli_distribution flip(0.5);
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = flip(rng) ? 1.0 : -1.0;
  }
}

}  // namespace projive
