#pragma once

#include <cstdint>
#include <random>

#include "helper/core/types.hpp"

namespace helper {

using Rng = std::mt19937_64;

enum class RngPurpose : std::uint32_t { kBackoff = 1, kChannel = 2, kJitter = 3 };

/// Independent named substream derived from the scenario seed.
inline Rng make_stream(std::uint64_t seed, NodeId node, RngPurpose purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(to_int(node)),
                    static_cast<std::uint32_t>(purpose)};
  return Rng(seq);
}

/// Uniform draw in [lo, hi). Written out rather than using
/// std::uniform_real_distribution so streams replay identically across
/// standard library implementations.
inline double uniform(Rng& rng, double lo, double hi) {
  double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + unit * (hi - lo);
}

}  // namespace helper
