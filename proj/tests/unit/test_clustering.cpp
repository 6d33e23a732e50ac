#include <gtest/gtest.h>

#include <algorithm>
#include <limits>

#include "helpers.hpp"
#include "tsmix/clustering.hpp"
#include "tsmix/error.hpp"
#include "tsmix/random.hpp"

using namespace tsmix;

namespace {

Matrix points_of(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.begin()->size());
    std::size_t r = 0;
    for (const auto& row : rows) {
        std::size_t c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

// Minimum over all bipartitions of the summed within-group squared deviation.
double brute_force_two_means(const Matrix& p) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = p.rows;
    for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << n); ++mask) {
        double total = 0.0;
        for (int side = 0; side < 2; ++side) {
            std::vector<double> mean(p.cols, 0.0);
            std::size_t count = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (((mask >> i) & 1u) != static_cast<std::size_t>(side)) continue;
                for (std::size_t d = 0; d < p.cols; ++d) mean[d] += p(i, d);
                ++count;
            }
            for (auto& m : mean) m /= static_cast<double>(count);
            for (std::size_t i = 0; i < n; ++i) {
                if (((mask >> i) & 1u) != static_cast<std::size_t>(side)) continue;
                for (std::size_t d = 0; d < p.cols; ++d) total += (p(i, d) - mean[d]) * (p(i, d) - mean[d]);
            }
        }
        best = std::min(best, total);
    }
    return best;
}

Matrix random_points(std::size_t n, std::size_t dims, Rng& rng) {
    Matrix m(n, dims);
    for (auto& v : m.data) v = standard_normal(rng);
    return m;
}

}  // namespace

TEST(KMeansInit, SingleCentroidIsADataPoint) {
    Rng rng(1);
    const auto p = random_points(20, 3, rng);
    const auto c = kmeans_init_plusplus(p, 1, 99);
    bool found = false;
    for (std::size_t i = 0; i < p.rows; ++i) found |= std::equal(c.row(0).begin(), c.row(0).end(), p.row(i).begin());
    EXPECT_TRUE(found);
}

TEST(KMeansInit, TwoPointsForceBothCentroids) {
    const auto p = points_of({{0, 0}, {10, 10}});
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto c = kmeans_init_plusplus(p, 2, seed);
        const bool ordered = c.row(0)[0] == 0.0 && c.row(1)[0] == 10.0;
        const bool swapped = c.row(0)[0] == 10.0 && c.row(1)[0] == 0.0;
        EXPECT_TRUE(ordered || swapped);
    }
}

TEST(KMeansInit, DeterministicAndGuarded) {
    Rng rng(2);
    const auto p = random_points(30, 2, rng);
    EXPECT_EQ(kmeans_init_plusplus(p, 5, 7), kmeans_init_plusplus(p, 5, 7));
    EXPECT_THROW(kmeans_init_plusplus(points_of({{1, 1}, {1, 1}, {2, 2}}), 3, 0), Error);
    EXPECT_THROW(kmeans_init_plusplus(p, 0, 0), Error);
}

TEST(KMeansFit, TwoFarPairs) {
    const auto p = points_of({{0, 0}, {0, 2}, {100, 0}, {100, 2}});
    KMeansOptions o;
    o.k = 2;
    const auto m = kmeans_fit(p, o);
    EXPECT_NEAR(m.inertia, 4.0, 1e-12);
    EXPECT_NEAR(m.inertia, brute_force_two_means(p), 1e-12);
    EXPECT_EQ(m.assignments[0], m.assignments[1]);
    EXPECT_EQ(m.assignments[2], m.assignments[3]);
    EXPECT_NE(m.assignments[0], m.assignments[2]);
}

TEST(KMeansFit, KEqualsDistinctPointsGivesZeroInertia) {
    const auto p = points_of({{0, 1}, {3, 4}, {3, 4}, {-2, 5}});
    KMeansOptions o;
    o.k = 3;
    const auto m = kmeans_fit(p, o);
    EXPECT_EQ(m.inertia, 0.0);
    for (auto s : m.sizes) EXPECT_GT(s, 0u);
}

TEST(KMeansFit, DegenerateInputNamed) {
    const auto p = points_of({{1, 1}, {1, 1}, {1, 1}});
    KMeansOptions o;
    o.k = 2;
    try {
        kmeans_fit(p, o);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::degenerate);
        EXPECT_NE(std::string(e.what()).find("identical"), std::string::npos);
    }
}

TEST(KMeansFit, ThirtySixNonEmptyClusters) {
    Rng rng(4);
    const auto p = random_points(2000, 5, rng);
    KMeansOptions o;
    o.k = 36;
    o.n_init = 1;
    const auto m = kmeans_fit(p, o);
    ASSERT_EQ(m.sizes.size(), 36u);
    std::size_t total = 0;
    for (auto s : m.sizes) {
        EXPECT_GT(s, 0u);
        total += s;
    }
    EXPECT_EQ(total, p.rows);
    for (double v : m.centroids.data) EXPECT_FALSE(std::isnan(v));
}

TEST(KMeansProperty, MatchesBruteForceOnSmallInstances) {
    Rng rng(31);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 3 + uniform_index(rng, 6);
        const auto p = random_points(n, 2, rng);
        KMeansOptions o;
        o.k = 2;
        o.seed = static_cast<std::uint64_t>(trial);
        const auto m = kmeans_fit(p, o);
        EXPECT_NEAR(m.inertia, brute_force_two_means(p), 1e-9) << "trial " << trial;
    }
}

TEST(KMeansProperty, InertiaNeverIncreases) {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = random_points(200, 3, rng);
        KMeansOptions o;
        o.k = 2 + static_cast<std::size_t>(trial % 9);
        o.seed = static_cast<std::uint64_t>(trial);
        const auto m = kmeans_fit(p, o);
        ASSERT_EQ(m.inertia_traces.size(), o.n_init);
        for (const auto& trace : m.inertia_traces) {
            for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1]);
        }
        EXPECT_NEAR(m.inertia, inertia(p, m.assignments, m.centroids), 1e-9);
    }
}

TEST(KMeansProperty, FixedSeedIsReproducible) {
    Rng rng(12);
    const auto p = random_points(300, 4, rng);
    KMeansOptions o;
    o.k = 6;
    o.seed = 5;
    EXPECT_EQ(kmeans_fit(p, o), kmeans_fit(p, o));
}

TEST(Lloyd, RepairsEmptyClusterWithFarthestPoint) {
    const auto p = points_of({{0}, {1}, {10}});
    // second centroid starts far away and captures nothing
    const auto m = lloyd(p, points_of({{3}, {1000}}), 1, 0.0);
    EXPECT_EQ(m.sizes[0] + m.sizes[1], 3u);
    EXPECT_GT(m.sizes[1], 0u);
}

TEST(Assign, ExactMatchTieAndTotality) {
    const auto c = points_of({{0, 0}, {1, 0}, {5, 5}, {2, 2}, {-1, 0}});
    EXPECT_EQ(assign(points_of({{2, 2}}), c)[0], 3u);
    // equidistant to centroids 1 and 4
    EXPECT_EQ(assign(points_of({{0, 0.5}}), points_of({{9, 9}, {1, 0}, {9, 9}, {9, 9}, {-1, 0}}))[0], 1u);
    const auto far = assign(points_of({{1e6, -1e6}, {-1e9, 3}}), c);
    EXPECT_EQ(far.size(), 2u);
    EXPECT_THROW(assign(points_of({{1, 2, 3}}), c), Error);
}

TEST(AssignProperty, PermutationEquivariant) {
    Rng rng(13);
    const auto p = random_points(50, 3, rng);
    const auto c = random_points(4, 3, rng);
    const auto base = assign(p, c);
    std::vector<std::size_t> perm(p.rows);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[uniform_index(rng, i + 1)]);
    const auto permuted = assign(select_rows(p, perm), c);
    for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(permuted[i], base[perm[i]]);
}

TEST(Inertia, DefinitionCases) {
    const auto c = points_of({{0, 0}});
    EXPECT_EQ(inertia(points_of({{0, 0}}), std::vector<std::size_t>{0}, c), 0.0);
    EXPECT_EQ(inertia(points_of({{2, 0}}), std::vector<std::size_t>{0}, c), 4.0);
    Rng rng(3);
    const auto p = random_points(10, 3, rng);
    const auto cs = random_points(3, 3, rng);
    std::vector<std::size_t> a(10);
    double expected = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
        a[i] = i % 3;
        for (std::size_t d = 0; d < 3; ++d) expected += (p(i, d) - cs(a[i], d)) * (p(i, d) - cs(a[i], d));
    }
    EXPECT_NEAR(inertia(p, a, cs), expected, 1e-12);
}

TEST(AssignmentsCsv, RoundTripAndValidation) {
    test::TempDir dir;
    const std::vector<std::size_t> idx = {0, 1, 2, 3};
    const std::vector<std::size_t> cl = {2, 0, 1, 2};
    write_assignments_csv(idx, cl, dir / "a.csv");
    EXPECT_EQ(test::read_file(dir / "a.csv").substr(0, 24), "window_index,cluster_id\n");
    EXPECT_EQ(read_assignments_csv(dir / "a.csv", 4), cl);
    EXPECT_THROW(read_assignments_csv(dir / "a.csv", 5), Error);
    test::write_file(dir / "dup.csv", "window_index,cluster_id\n0,1\n0,2\n");
    EXPECT_THROW(read_assignments_csv(dir / "dup.csv", 2), Error);
}
