#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace tsmix {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Derives an independent child seed for a named stream. Every random
/// decision in the library is keyed this way so results do not depend on
/// thread interleaving.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index = 0) noexcept;

// The helpers below avoid std:: distributions, whose output is
// implementation-defined, so that seeded runs match across toolchains.

/// Uniform double in [0, 1) with 53 random bits.
double uniform01(Rng& rng) noexcept;

/// Uniform integer in [0, n). Requires n > 0.
std::size_t uniform_index(Rng& rng, std::size_t n) noexcept;

double standard_normal(Rng& rng) noexcept;

/// m distinct values from [0, n) in draw order (partial Fisher-Yates).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m, Rng& rng);

}  // namespace tsmix
