#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fptgrf {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Folds a sequence of stream coordinates into a master seed.
// derive_seed(s, {a, b}) == splitmix64(splitmix64(splitmix64(s) ^ (a + 1)) ^ (b + 1)).
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> coords) noexcept {
  std::uint64_t state = splitmix64(master);
  for (std::uint64_t c : coords) state = splitmix64(state ^ (c + 1));
  return state;
}

// Seed of tree b in a forest with the given master seed.
constexpr std::uint64_t tree_seed(std::uint64_t master, std::uint64_t tree_index) noexcept {
  return derive_seed(master, {tree_index});
}

}  // namespace fptgrf
