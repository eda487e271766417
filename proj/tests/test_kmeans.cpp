#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "hetfeed/kmeans.hpp"
#include "test_support.hpp"

using namespace hetfeed;

namespace {

EmbeddingMap points_of(const std::vector<std::vector<double>>& pts) {
    EmbeddingMap m;
    for (std::size_t i = 0; i < pts.size(); ++i) m["p" + std::to_string(i)] = {pts[i]};
    return m;
}

// Minimum within-cluster sum of squares over all 2-partitions.
double exhaustive_two_partition(const std::vector<std::vector<double>>& pts) {
    const std::size_t n = pts.size(), d = pts[0].size();
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
        double sse = 0.0;
        for (unsigned side = 0; side < 2; ++side) {
            std::vector<double> mean(d, 0.0);
            std::size_t count = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (((mask >> i) & 1u) == side) {
                    for (std::size_t c = 0; c < d; ++c) mean[c] += pts[i][c];
                    ++count;
                }
            for (auto& m : mean) m /= static_cast<double>(count);
            for (std::size_t i = 0; i < n; ++i)
                if (((mask >> i) & 1u) == side)
                    for (std::size_t c = 0; c < d; ++c) sse += (pts[i][c] - mean[c]) * (pts[i][c] - mean[c]);
        }
        best = std::min(best, sse);
    }
    return best;
}

std::vector<std::vector<double>> random_points(std::mt19937_64& rng, std::size_t n, std::size_t d) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::vector<double>> pts(n, std::vector<double>(d));
    for (auto& p : pts)
        for (auto& x : p) x = g(rng);
    return pts;
}

void expect_assignment_optimal(const EmbeddingMap& m, const ClusterModel& model) {
    for (const auto& [id, v] : m) {
        const auto c = model.cluster_of(id);
        const double own = squared_distance(v.values, model.centroids[c]);
        for (std::size_t j = 0; j < model.k; ++j) {
            const double other = squared_distance(v.values, model.centroids[j]);
            EXPECT_LE(own, other);
            if (other == own) {
                EXPECT_LE(c, j) << "ties go to the lowest index";
            }
        }
    }
}

} // namespace

TEST(KMeans, TwoObviousClusters) {
    const auto m = points_of({{0, 0}, {0, 1}, {10, 10}, {10, 11}});
    const auto model = kmeans_fit(m, {.k = 2, .seed = 1});
    EXPECT_EQ(model.cluster_of("p0"), model.cluster_of("p1"));
    EXPECT_EQ(model.cluster_of("p2"), model.cluster_of("p3"));
    EXPECT_NE(model.cluster_of("p0"), model.cluster_of("p2"));
    EXPECT_NEAR(model.inertia, exhaustive_two_partition({{0, 0}, {0, 1}, {10, 10}, {10, 11}}), 1e-12);
    EXPECT_DOUBLE_EQ(model.inertia, 1.0);
}

TEST(KMeans, SingleClusterCentroidIsMean) {
    const auto m = points_of({{1, 2}, {3, 4}, {5, 9}});
    const auto model = kmeans_fit(m, {.k = 1});
    ASSERT_EQ(model.centroids.size(), 1u);
    EXPECT_DOUBLE_EQ(model.centroids[0][0], 3.0);
    EXPECT_DOUBLE_EQ(model.centroids[0][1], 5.0);
    for (const auto& [id, c] : model.assignments) EXPECT_EQ(c, 0u);
}

TEST(KMeans, OneClusterPerDistinctPoint) {
    const auto m = points_of({{0, 0}, {1, 0}, {0, 1}, {5, 5}, {0, 0}});
    const auto model = kmeans_fit(m, {.k = 4, .seed = 3});
    EXPECT_EQ(model.inertia, 0.0);
    EXPECT_EQ(model.cluster_of("p0"), model.cluster_of("p4"));
}

TEST(KMeans, InputErrors) {
    EXPECT_THROW(kmeans_fit(points_of({{0, 0}, {0, 0}, {1, 1}}), {.k = 3}), DataError);
    EXPECT_THROW(kmeans_fit(points_of({{0, 0}, {std::nan(""), 1}}), {.k = 1}), DataError);
    EXPECT_THROW(kmeans_fit(points_of({{0, 0}, {INFINITY, 1}}), {.k = 1}), DataError);
    EXPECT_THROW(kmeans_fit(points_of({{0, 0}, {1, 1, 1}}), {.k = 1}), DataError);
    EXPECT_THROW(kmeans_fit(points_of({{0, 0}}), {.k = 0}), ConfigError);
    EXPECT_THROW(kmeans_fit({}, {.k = 1}), DataError);
}

TEST(KMeans, JsonRoundTrip) {
    std::mt19937_64 rng(1);
    const auto m = points_of(random_points(rng, 30, 3));
    const auto model = kmeans_fit(m, {.k = 4, .seed = 9});
    const auto back = cluster_model_from_json(Json::parse(to_json(model).dump()));
    EXPECT_EQ(back.centroids, model.centroids);
    EXPECT_EQ(back.assignments, model.assignments);
    EXPECT_EQ(back.k, model.k);
    EXPECT_EQ(back.seed, model.seed);
    EXPECT_EQ(back.inertia, model.inertia);
}

TEST(KMeansProperties, AssignmentsNearestAndInertiaMonotone) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 10 + rng() % 60, d = 1 + rng() % 5, k = 1 + rng() % 8;
        const auto m = points_of(random_points(rng, n, d));
        const auto model = kmeans_fit(m, {.k = k, .seed = rng(), .max_iters = 300, .tol = 0.0});
        expect_assignment_optimal(m, model);
        for (std::size_t i = 1; i < model.inertia_history.size(); ++i)
            EXPECT_LE(model.inertia_history[i], model.inertia_history[i - 1] * (1 + 1e-12) + 1e-15);
        double sum = 0.0;
        for (const auto& [id, v] : m)
            sum += squared_distance(v.values, model.centroids[model.cluster_of(id)]);
        EXPECT_NEAR(model.inertia, sum, 1e-9 * (1 + sum));
    }
}

TEST(KMeansProperties, DeterministicAcrossRunsAndThreads) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = points_of(random_points(rng, 200, 6));
        KMeansOptions o{.k = 10, .seed = static_cast<std::uint64_t>(trial), .restarts = 2};
        const auto a = kmeans_fit(m, o);
        const auto b = kmeans_fit(m, o);
        o.threads = 4;
        const auto c = kmeans_fit(m, o);
        EXPECT_EQ(a, b);
        EXPECT_EQ(a, c);
    }
}

TEST(KMeansProperties, NearExhaustiveOptimumOnSmallInstances) {
    std::mt19937_64 rng(4);
    int hits = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng() % 7, d = 1 + rng() % 3;
        const auto pts = random_points(rng, n, d);
        const auto model = kmeans_fit(points_of(pts), {.k = 2, .seed = 17, .restarts = 5});
        if (std::abs(model.inertia - exhaustive_two_partition(pts)) <= 1e-9) ++hits;
    }
    EXPECT_GE(hits, 95);
}

TEST(KMeansProperties, RestartsNeverWorse) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = points_of(random_points(rng, 40, 2));
        const auto one = kmeans_fit(m, {.k = 5, .seed = 100});
        const auto many = kmeans_fit(m, {.k = 5, .seed = 100, .restarts = 4});
        EXPECT_LE(many.inertia, one.inertia);
    }
}

TEST(SplitMix, ReferenceSequence) {
    // Reference values for seed 0 of the splitmix64 generator.
    SplitMix64 rng(0);
    EXPECT_EQ(rng.next(), 0xe220a8397b1dcdafULL);
    EXPECT_EQ(rng.next(), 0x6e789e6aa1b965f4ULL);
    EXPECT_EQ(rng.next(), 0x06c45d188009454fULL);
    SplitMix64 u(42);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.uniform();
        EXPECT_GE(x, 0.0);
        EXPECT_LT(x, 1.0);
    }
}
