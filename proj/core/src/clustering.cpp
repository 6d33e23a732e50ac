#include "tsmix/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "text_io.hpp"
#include "tsmix/error.hpp"
#include "tsmix/random.hpp"

namespace tsmix {

std::size_t count_distinct_rows(const Matrix& points) {
    std::vector<std::size_t> order(points.rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto less = [&](std::size_t a, std::size_t b) {
        const auto ra = points.row(a), rb = points.row(b);
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
    };
    std::sort(order.begin(), order.end(), less);
    std::size_t distinct = points.rows == 0 ? 0 : 1;
    for (std::size_t i = 1; i < order.size(); ++i) distinct += less(order[i - 1], order[i]);
    return distinct;
}

Matrix kmeans_init_plusplus(const Matrix& points, std::size_t k, std::uint64_t seed) {
    if (k < 1) throw Error(ErrorKind::invalid_argument, "k must be at least 1");
    const std::size_t distinct = count_distinct_rows(points);
    if (k > distinct) {
        throw Error(ErrorKind::degenerate, "k = " + std::to_string(k) + " exceeds the number of distinct points (" +
                                               std::to_string(distinct) + ")");
    }
    Rng rng(seed);
    Matrix centroids(k, points.cols);
    const auto first = points.row(uniform_index(rng, points.rows));
    std::copy(first.begin(), first.end(), centroids.row(0).begin());

    std::vector<double> nearest(points.rows);
    for (std::size_t i = 0; i < points.rows; ++i) nearest[i] = squared_distance(points.row(i), centroids.row(0));

    for (std::size_t c = 1; c < k; ++c) {
        const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
        const double target = uniform01(rng) * total;
        std::size_t pick = points.rows;
        double cumulative = 0.0;
        for (std::size_t i = 0; i < points.rows; ++i) {
            if (nearest[i] <= 0.0) continue;
            cumulative += nearest[i];
            pick = i;
            if (cumulative > target) break;
        }
        // pick is the last positive-weight point if rounding left target unreached.
        const auto chosen = points.row(pick);
        std::copy(chosen.begin(), chosen.end(), centroids.row(c).begin());
        for (std::size_t i = 0; i < points.rows; ++i) {
            nearest[i] = std::min(nearest[i], squared_distance(points.row(i), centroids.row(c)));
        }
    }
    return centroids;
}

std::vector<std::size_t> assign(const Matrix& points, const Matrix& centroids) {
    if (points.cols != centroids.cols) {
        throw Error(ErrorKind::invalid_argument, "dimension mismatch: points have " + std::to_string(points.cols) +
                                                     " dims, centroids " + std::to_string(centroids.cols));
    }
    if (centroids.rows == 0) throw Error(ErrorKind::invalid_argument, "no centroids");
    std::vector<std::size_t> out(points.rows);
    for (std::size_t i = 0; i < points.rows; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_id = 0;
        for (std::size_t c = 0; c < centroids.rows; ++c) {
            const double d = squared_distance(points.row(i), centroids.row(c));
            if (d < best) {
                best = d;
                best_id = c;
            }
        }
        out[i] = best_id;
    }
    return out;
}

double inertia(const Matrix& points, std::span<const std::size_t> assignments, const Matrix& centroids) {
    if (assignments.size() != points.rows || points.cols != centroids.cols) {
        throw Error(ErrorKind::invalid_argument, "inertia: inconsistent shapes");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < points.rows; ++i) {
        if (assignments[i] >= centroids.rows) throw Error(ErrorKind::invalid_argument, "inertia: cluster id out of range");
        total += squared_distance(points.row(i), centroids.row(assignments[i]));
    }
    return total;
}

std::vector<std::size_t> cluster_sizes(std::span<const std::size_t> assignments, std::size_t k) {
    std::vector<std::size_t> sizes(k, 0);
    for (const auto a : assignments) {
        if (a >= k) throw Error(ErrorKind::invalid_argument, "cluster id " + std::to_string(a) + " out of range");
        ++sizes[a];
    }
    return sizes;
}

namespace {

// Gives every empty cluster the point currently farthest from its centroid,
// taken from a cluster that keeps at least one member.
void repair_empty(const Matrix& points, Matrix& centroids, std::vector<std::size_t>& labels,
                  std::vector<std::size_t>& sizes) {
    for (std::size_t c = 0; c < centroids.rows; ++c) {
        if (sizes[c] != 0) continue;
        double worst = -1.0;
        std::size_t worst_i = points.rows;
        for (std::size_t i = 0; i < points.rows; ++i) {
            if (sizes[labels[i]] < 2) continue;
            const double d = squared_distance(points.row(i), centroids.row(labels[i]));
            if (d > worst) {
                worst = d;
                worst_i = i;
            }
        }
        if (worst_i == points.rows) continue;
        const auto p = points.row(worst_i);
        std::copy(p.begin(), p.end(), centroids.row(c).begin());
        --sizes[labels[worst_i]];
        labels[worst_i] = c;
        sizes[c] = 1;
    }
}

Matrix cluster_means(const Matrix& points, std::span<const std::size_t> labels, std::span<const std::size_t> sizes,
                     const Matrix& previous) {
    Matrix means(previous.rows, previous.cols, 0.0);
    for (std::size_t i = 0; i < points.rows; ++i) {
        auto dst = means.row(labels[i]);
        const auto src = points.row(i);
        for (std::size_t d = 0; d < src.size(); ++d) dst[d] += src[d];
    }
    for (std::size_t c = 0; c < means.rows; ++c) {
        auto row = means.row(c);
        if (sizes[c] == 0) {
            const auto prev = previous.row(c);
            std::copy(prev.begin(), prev.end(), row.begin());
            continue;
        }
        for (auto& v : row) v /= static_cast<double>(sizes[c]);
    }
    return means;
}

// Single-point transfers that lower the objective once centroid movement is
// accounted for. Leaves centroids equal to exact cluster means.
void hartigan_refine(const Matrix& points, Matrix& centroids, std::vector<std::size_t>& labels,
                     std::vector<std::size_t>& sizes) {
    centroids = cluster_means(points, labels, sizes, centroids);
    bool moved = true;
    std::size_t passes = 0;
    while (moved && passes++ < 100) {
        moved = false;
        for (std::size_t i = 0; i < points.rows; ++i) {
            const std::size_t a = labels[i];
            if (sizes[a] < 2) continue;
            const auto x = points.row(i);
            const double na = static_cast<double>(sizes[a]);
            const double removal = na / (na - 1.0) * squared_distance(x, centroids.row(a));
            double best = removal;
            std::size_t best_b = a;
            for (std::size_t b = 0; b < centroids.rows; ++b) {
                if (b == a) continue;
                const double nb = static_cast<double>(sizes[b]);
                const double cost = nb / (nb + 1.0) * squared_distance(x, centroids.row(b));
                if (cost < best) {
                    best = cost;
                    best_b = b;
                }
            }
            if (best_b == a || removal - best <= 1e-12 * removal) continue;
            auto ca = centroids.row(a);
            auto cb = centroids.row(best_b);
            const double nb = static_cast<double>(sizes[best_b]);
            for (std::size_t d = 0; d < x.size(); ++d) {
                ca[d] = (ca[d] * na - x[d]) / (na - 1.0);
                cb[d] = (cb[d] * nb + x[d]) / (nb + 1.0);
            }
            --sizes[a];
            ++sizes[best_b];
            labels[i] = best_b;
            moved = true;
        }
    }
    // incremental updates drift; finish on exact means
    centroids = cluster_means(points, labels, sizes, centroids);
}

}  // namespace

ClusterModel lloyd(const Matrix& points, Matrix centroids, std::size_t max_iter, double tol) {
    if (max_iter < 1) throw Error(ErrorKind::invalid_argument, "max_iter must be at least 1");
    if (tol < 0.0) throw Error(ErrorKind::invalid_argument, "tol must be non-negative");

    ClusterModel model;
    model.k = centroids.rows;
    std::vector<double> trace;

    auto labels = assign(points, centroids);
    auto sizes = cluster_sizes(labels, model.k);
    repair_empty(points, centroids, labels, sizes);
    trace.push_back(inertia(points, labels, centroids));

    std::size_t it = 0;
    while (it < max_iter) {
        ++it;
        Matrix next = cluster_means(points, labels, sizes, centroids);
        double shift = 0.0;
        for (std::size_t c = 0; c < next.rows; ++c) {
            shift = std::max(shift, std::sqrt(squared_distance(next.row(c), centroids.row(c))));
        }
        centroids = std::move(next);
        labels = assign(points, centroids);
        sizes = cluster_sizes(labels, model.k);
        repair_empty(points, centroids, labels, sizes);
        trace.push_back(inertia(points, labels, centroids));
        if (shift < tol || shift == 0.0) break;
    }
    hartigan_refine(points, centroids, labels, sizes);
    const double refined = inertia(points, labels, centroids);
    if (refined < trace.back()) trace.push_back(refined);

    model.centroids = std::move(centroids);
    model.assignments = std::move(labels);
    model.sizes = std::move(sizes);
    model.inertia = trace.back();
    model.iterations = it;
    model.inertia_traces.push_back(std::move(trace));
    return model;
}

ClusterModel kmeans_fit(const Matrix& points, const KMeansOptions& options) {
    if (points.rows == 0) throw Error(ErrorKind::invalid_argument, "kmeans_fit: no points");
    if (options.n_init < 1) throw Error(ErrorKind::invalid_argument, "n_init must be at least 1");
    if (options.k > 1 && count_distinct_rows(points) == 1) {
        throw Error(ErrorKind::degenerate,
                    "degenerate input: all " + std::to_string(points.rows) + " points are identical, cannot form " +
                        std::to_string(options.k) + " clusters");
    }

    ClusterModel best;
    std::vector<std::vector<double>> traces;
    for (std::size_t run = 0; run < options.n_init; ++run) {
        const auto init_seed = derive_seed(options.seed, "kmeans-init", run);
        ClusterModel model = lloyd(points, kmeans_init_plusplus(points, options.k, init_seed), options.max_iter,
                                   options.tol);
        traces.push_back(model.inertia_traces.front());
        if (run == 0 || model.inertia < best.inertia) best = std::move(model);
    }
    best.inertia_traces = std::move(traces);
    return best;
}

void write_assignments_csv(std::span<const std::size_t> window_indices, std::span<const std::size_t> clusters,
                           const std::filesystem::path& path) {
    if (window_indices.size() != clusters.size()) {
        throw Error(ErrorKind::invalid_argument, "write_assignments_csv: length mismatch");
    }
    auto out = detail::open_output(path);
    out << "window_index,cluster_id\n";
    for (std::size_t i = 0; i < clusters.size(); ++i) out << window_indices[i] << ',' << clusters[i] << '\n';
    detail::finish_output(out, path);
}

std::vector<std::size_t> read_assignments_csv(const std::filesystem::path& path, std::size_t n_windows) {
    auto in = detail::open_input(path);
    std::string line;
    std::getline(in, line);
    if (detail::trim(line) != "window_index,cluster_id") {
        throw Error(ErrorKind::parse, path.string() + ": unexpected assignments header");
    }
    constexpr auto unset = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> clusters(n_windows, unset);
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        const auto fields = detail::split_fields(line);
        const auto w = fields.size() == 2 ? detail::parse_int(fields[0]) : std::nullopt;
        const auto c = fields.size() == 2 ? detail::parse_int(fields[1]) : std::nullopt;
        if (!w || !c || *w < 0 || *c < 0 || static_cast<std::size_t>(*w) >= n_windows) {
            throw Error(ErrorKind::parse, path.string() + ": bad assignment row " + std::to_string(row));
        }
        if (clusters[*w] != unset) {
            throw Error(ErrorKind::parse, path.string() + ": window " + std::to_string(*w) + " assigned twice");
        }
        clusters[*w] = static_cast<std::size_t>(*c);
    }
    if (std::find(clusters.begin(), clusters.end(), unset) != clusters.end()) {
        throw Error(ErrorKind::parse, path.string() + ": assignments do not cover every window");
    }
    return clusters;
}

}  // namespace tsmix
