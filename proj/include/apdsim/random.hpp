// ============================================================================
// random.hpp -- deterministic seeding utilities
//
// Per-trial seeds are derived from a master seed with a SplitMix64-style
// mixing permutation so that trials are reproducible and can be run in any
// order (or in parallel) without sharing generator state.
//
// Mixing function (64-bit, all constants from the published SplitMix64
// finalizer):
//   z  = master + (index + 1) * 0x9E3779B97F4A7C15
//   z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
//   z ^= z >> 27;  z *= 0x94D049BB133111EB
//   z ^= z >> 31
// The additive step is injective in `index` for a fixed master seed and the
// finalizer is a bijection, so derived seeds never collide within a run.
// ============================================================================
#pragma once

#include <cstdint>
#include <random>

namespace apdsim {

using Rng = std::mt19937_64;

inline std::uint64_t derive_trial_seed(std::uint64_t master_seed,
                                       std::uint64_t trial_index) {
  std::uint64_t z = master_seed + (trial_index + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t master_seed, std::uint64_t trial_index) {
  return Rng(derive_trial_seed(master_seed, trial_index));
}

}  // namespace apdsim
