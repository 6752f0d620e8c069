#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lqglab {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// FNV-1a, used for config hashes and output fingerprints.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

/// Per-sample seed: a pure function of (root, experiment, index), so the
/// degree of parallelism never changes the stream a sample sees.
std::uint64_t derive_seed(std::uint64_t root, std::string_view experiment, std::uint64_t index);

inline Rng make_rng(std::uint64_t root, std::string_view experiment, std::uint64_t index) {
  return Rng(derive_seed(root, experiment, index));
}

}  // namespace lqglab
