#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace egpssm {

using Rng = std::mt19937_64;

/// Deterministically folds a list of integers into one 64-bit seed
/// (splitmix64 finalizer applied per element).
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x9E3779B97F4A7C15ULL;
  for (std::uint64_t p : parts) {
    std::uint64_t z = h + p + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    h = z ^ (z >> 31);
  }
  return h;
}

}  // namespace egpssm
