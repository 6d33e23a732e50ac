#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace tsmix {

/// Per-cluster sampling weights, each in [0, 1].
struct WeightVector {
    std::vector<double> w;

    WeightVector() = default;
    explicit WeightVector(std::vector<double> values);

    std::size_t size() const noexcept { return w.size(); }
    double operator[](std::size_t j) const { return w[j]; }

    friend bool operator==(const WeightVector&, const WeightVector&) = default;
};

/// Selected items per cluster. Indices refer to positions in the assignment
/// array the mixture was built from.
struct MixtureIndex {
    std::vector<std::vector<std::size_t>> per_cluster;
    std::vector<std::size_t> counts;
    std::size_t total = 0;

    /// All selected positions, ascending.
    std::vector<std::size_t> flattened() const;
};

/// n_k = round_half_up(C_k * w_k).
std::size_t mixture_count(std::size_t cluster_size, double weight) noexcept;

/// Draws n_k items uniformly without replacement from every cluster k.
/// Returns nullopt when the mixture would be empty.
std::optional<MixtureIndex> build_mixture(std::span<const std::size_t> assignments, const WeightVector& weights,
                                          std::uint64_t seed);

}  // namespace tsmix
