#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace picosync {

using Rng = std::mt19937_64;

/// Derives a component seed from a master seed and a component name
/// (FNV-1a over the name, mixed with the master seed by splitmix64).
std::uint64_t derive_seed(std::uint64_t master, std::string_view component);

/// Deterministic standard normal from a counter, for processes that must be
/// evaluable at arbitrary points (e.g. random-walk drift).
double counter_normal(std::uint64_t seed, std::uint64_t index);

/// Draws the number of empty slots before the next occupied one, where each
/// slot is independently occupied with probability `p`. Returns UINT64_MAX
/// when p == 0.
std::uint64_t skip_empty_slots(Rng& rng, double p);

/// Poisson(mean) conditioned on >= 1.
std::uint32_t zero_truncated_poisson(Rng& rng, double mean);

/// Bose-Einstein (thermal) count with given mean, conditioned on >= 1.
std::uint32_t zero_truncated_thermal(Rng& rng, double mean);

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace picosync
