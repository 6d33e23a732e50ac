#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tsmix/matrix.hpp"

namespace tsmix {

struct KMeansOptions {
    std::size_t k = 36;
    std::size_t max_iter = 300;
    /// Stop once the largest centroid displacement falls below this.
    double tol = 1e-6;
    std::uint64_t seed = 0;
    /// Independent k-means++ restarts; the lowest-inertia run is kept.
    std::size_t n_init = 10;
};

struct ClusterModel {
    std::size_t k = 0;
    Matrix centroids;
    std::vector<std::size_t> assignments;
    std::vector<std::size_t> sizes;
    double inertia = 0.0;
    std::size_t iterations = 0;
    /// Inertia after every assignment step, one trace per restart.
    std::vector<std::vector<double>> inertia_traces;

    friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

/// k-means++ seeding: first centre uniform, later ones proportional to the
/// squared distance to the nearest centre already chosen.
Matrix kmeans_init_plusplus(const Matrix& points, std::size_t k, std::uint64_t seed);

/// Lloyd iterations from explicit starting centroids. Empty clusters take the
/// point farthest from its centroid.
ClusterModel lloyd(const Matrix& points, Matrix centroids, std::size_t max_iter, double tol);

ClusterModel kmeans_fit(const Matrix& points, const KMeansOptions& options);

/// Nearest centroid by squared Euclidean distance; ties go to the lowest id.
std::vector<std::size_t> assign(const Matrix& points, const Matrix& centroids);

double inertia(const Matrix& points, std::span<const std::size_t> assignments, const Matrix& centroids);

std::vector<std::size_t> cluster_sizes(std::span<const std::size_t> assignments, std::size_t k);

std::size_t count_distinct_rows(const Matrix& points);

/// CSV with header `window_index,cluster_id`.
void write_assignments_csv(std::span<const std::size_t> window_indices, std::span<const std::size_t> clusters,
                           const std::filesystem::path& path);
/// Returns cluster id per window, indexed by window_index. Every index in
/// [0, n_windows) must be present exactly once.
std::vector<std::size_t> read_assignments_csv(const std::filesystem::path& path, std::size_t n_windows);

}  // namespace tsmix
