#include "tsmix/mixture.hpp"

#include <algorithm>
#include <cmath>

#include "tsmix/error.hpp"
#include "tsmix/random.hpp"

namespace tsmix {

WeightVector::WeightVector(std::vector<double> values) : w(std::move(values)) {
    for (std::size_t j = 0; j < w.size(); ++j) {
        if (!(w[j] >= 0.0 && w[j] <= 1.0)) {
            throw Error(ErrorKind::invalid_argument,
                        "weight " + std::to_string(j) + " = " + std::to_string(w[j]) + " is outside [0, 1]");
        }
    }
}

std::vector<std::size_t> MixtureIndex::flattened() const {
    std::vector<std::size_t> out;
    out.reserve(total);
    for (const auto& members : per_cluster) out.insert(out.end(), members.begin(), members.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t mixture_count(std::size_t cluster_size, double weight) noexcept {
    const double exact = static_cast<double>(cluster_size) * weight;
    const auto n = static_cast<std::size_t>(std::floor(exact + 0.5));
    return std::min(n, cluster_size);
}

std::optional<MixtureIndex> build_mixture(std::span<const std::size_t> assignments, const WeightVector& weights,
                                          std::uint64_t seed) {
    if (assignments.empty()) throw Error(ErrorKind::invalid_argument, "build_mixture: no assignments");
    const std::size_t k = weights.size();
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] >= k) {
            throw Error(ErrorKind::invalid_argument, "cluster id " + std::to_string(assignments[i]) +
                                                         " has no weight (k = " + std::to_string(k) + ")");
        }
        members[assignments[i]].push_back(i);
    }

    MixtureIndex mix;
    mix.per_cluster.resize(k);
    mix.counts.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t n = mixture_count(members[c].size(), weights[c]);
        mix.counts[c] = n;
        mix.total += n;
        if (n == members[c].size()) {
            mix.per_cluster[c] = members[c];
            continue;
        }
        Rng rng(derive_seed(seed, "mixture-cluster", c));
        for (const auto pick : sample_without_replacement(members[c].size(), n, rng)) {
            mix.per_cluster[c].push_back(members[c][pick]);
        }
    }
    if (mix.total == 0) return std::nullopt;
    return mix;
}

}  // namespace tsmix
