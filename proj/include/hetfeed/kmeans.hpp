#pragma once

// k-means++ seeding followed by Lloyd iterations over prompt embeddings.
// Points are visited in id order and every reduction runs in that fixed
// order, so a (data, options) pair always yields bit-identical models
// regardless of the number of assignment threads.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "hetfeed/embedding.hpp"
#include "hetfeed/error.hpp"
#include "hetfeed/io.hpp"
#include "hetfeed/random.hpp"

namespace hetfeed {

struct KMeansOptions {
    std::size_t k = 10;
    std::uint64_t seed = 0;
    std::size_t max_iters = 300;
    double tol = 1e-6;
    std::size_t threads = 1;
    // Independent fits with seeds seed, seed+1, ...; the lowest inertia wins.
    std::size_t restarts = 1;
};

struct ClusterModel {
    std::size_t k = 0;
    std::vector<std::vector<double>> centroids;
    std::map<std::string, std::size_t> assignments;
    double inertia = 0.0;
    std::uint64_t seed = 0;
    std::size_t iterations = 0;
    // Inertia after every assignment step, final assignment included.
    std::vector<double> inertia_history;

    bool operator==(const ClusterModel&) const = default;

    std::size_t cluster_of(const std::string& id) const {
        auto it = assignments.find(id);
        if (it == assignments.end())
            throw DataError("prompt '" + id + "' has no cluster assignment");
        return it->second;
    }
};

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

namespace detail {

struct Assignment {
    std::vector<std::size_t> labels;
    std::vector<double> dist2;
};

inline std::size_t nearest(const std::vector<double>& x,
                           const std::vector<std::vector<double>>& centroids, double& best) {
    std::size_t idx = 0;
    best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centroids.size(); ++j) {
        const double d = squared_distance(x, centroids[j]);
        if (d < best) {
            best = d;
            idx = j;
        }
    }
    return idx;
}

inline Assignment assign(const std::vector<const std::vector<double>*>& points,
                         const std::vector<std::vector<double>>& centroids,
                         std::size_t threads) {
    const std::size_t n = points.size();
    Assignment a{std::vector<std::size_t>(n), std::vector<double>(n)};
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            a.labels[i] = nearest(*points[i], centroids, a.dist2[i]);
    };
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, n));
    if (threads == 1) {
        work(0, n);
        return a;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
    return a;
}

inline double total(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

inline std::vector<std::vector<double>> seed_plus_plus(
    const std::vector<const std::vector<double>*>& points, std::size_t k, SplitMix64& rng) {
    const std::size_t n = points.size();
    std::vector<std::vector<double>> centroids;
    centroids.reserve(k);
    auto first = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
    centroids.push_back(*points[std::min(first, n - 1)]);

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(*points[i], centroids[0]);

    while (centroids.size() < k) {
        const double sum = total(d2);
        const double target = rng.uniform() * sum;
        std::size_t pick = n;
        std::size_t last_positive = n;
        double cumulative = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] <= 0.0) continue;
            last_positive = i;
            cumulative += d2[i];
            if (cumulative > target) {
                pick = i;
                break;
            }
        }
        if (pick == n) pick = last_positive; // rounding at the top of the range
        centroids.push_back(*points[pick]);
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], squared_distance(*points[i], centroids.back()));
    }
    return centroids;
}

// Empty clusters take the point farthest from its centroid among clusters
// that can spare one (ties to the lowest point index).
inline void repair_empty(Assignment& a, std::size_t k) {
    std::vector<std::size_t> counts(k, 0);
    for (auto l : a.labels) ++counts[l];
    for (std::size_t j = 0; j < k; ++j) {
        if (counts[j] != 0) continue;
        std::size_t far = a.labels.size();
        double far_d = -1.0;
        for (std::size_t i = 0; i < a.labels.size(); ++i) {
            if (counts[a.labels[i]] > 1 && a.dist2[i] > far_d) {
                far_d = a.dist2[i];
                far = i;
            }
        }
        if (far == a.labels.size()) throw DataError("k-means: cannot repair empty cluster");
        --counts[a.labels[far]];
        a.labels[far] = j;
        a.dist2[far] = 0.0;
        counts[j] = 1;
    }
}

inline std::vector<std::vector<double>> means(const std::vector<const std::vector<double>*>& points,
                                              const std::vector<std::size_t>& labels,
                                              std::size_t k, std::size_t dim) {
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto& s = sums[labels[i]];
        for (std::size_t c = 0; c < dim; ++c) s[c] += (*points[i])[c];
        ++counts[labels[i]];
    }
    for (std::size_t j = 0; j < k; ++j)
        for (double& v : sums[j]) v /= static_cast<double>(counts[j]);
    return sums;
}

// Hartigan single-point moves after Lloyd stalls. Moving x from a (size na)
// to b (size nb) changes the SSE by nb/(nb+1)|x-cb|^2 - na/(na-1)|x-ca|^2.
// Points are visited in index order, so the result does not depend on threads.
inline void hartigan_refine(const std::vector<const std::vector<double>*>& points,
                            std::vector<std::size_t>& labels, std::vector<std::vector<double>>& centroids,
                            std::size_t max_passes) {
    const std::size_t k = centroids.size();
    const std::size_t dim = centroids.front().size();
    std::vector<std::size_t> counts(k, 0);
    for (auto l : labels) ++counts[l];
    for (std::size_t pass = 0; pass < max_passes; ++pass) {
        bool moved = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto& x = *points[i];
            const std::size_t a = labels[i];
            if (counts[a] < 2) continue;
            const double na = static_cast<double>(counts[a]);
            const double cost_out = na / (na - 1.0) * squared_distance(x, centroids[a]);
            std::size_t best = a;
            double best_gain = 0.0;
            for (std::size_t b = 0; b < k; ++b) {
                if (b == a) continue;
                const double nb = static_cast<double>(counts[b]);
                const double gain = cost_out - nb / (nb + 1.0) * squared_distance(x, centroids[b]);
                // relative guard so rounding noise cannot cycle a point back and forth
                if (gain > best_gain && gain > 1e-12 * cost_out) {
                    best_gain = gain;
                    best = b;
                }
            }
            if (best == a) continue;
            const double nb = static_cast<double>(counts[best]);
            for (std::size_t c = 0; c < dim; ++c) {
                centroids[a][c] = (centroids[a][c] * na - x[c]) / (na - 1.0);
                centroids[best][c] = (centroids[best][c] * nb + x[c]) / (nb + 1.0);
            }
            --counts[a];
            ++counts[best];
            labels[i] = best;
            moved = true;
        }
        if (!moved) break;
    }
}

inline ClusterModel fit_once(const std::vector<std::string>& ids,
                             const std::vector<const std::vector<double>*>& points,
                             const KMeansOptions& opts, std::uint64_t seed) {
    const std::size_t k = opts.k;
    const std::size_t dim = points.front()->size();
    SplitMix64 rng(seed);
    auto centroids = seed_plus_plus(points, k, rng);

    ClusterModel model;
    model.k = k;
    model.seed = seed;
    for (std::size_t it = 0; it < opts.max_iters; ++it) {
        auto a = assign(points, centroids, opts.threads);
        model.inertia_history.push_back(total(a.dist2));
        repair_empty(a, k);
        auto next = means(points, a.labels, k, dim);
        double shift = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            shift = std::max(shift, std::sqrt(squared_distance(next[j], centroids[j])));
        centroids = std::move(next);
        model.iterations = it + 1;
        if (shift < opts.tol || shift == 0.0) break;
    }

    auto settled = assign(points, centroids, opts.threads);
    hartigan_refine(points, settled.labels, centroids, opts.max_iters);
    // recompute means exactly; the incremental updates drift in the last bits
    centroids = means(points, settled.labels, k, dim);

    auto final_assignment = assign(points, centroids, opts.threads);
    model.inertia = total(final_assignment.dist2);
    model.inertia_history.push_back(model.inertia);
    model.centroids = std::move(centroids);
    for (std::size_t i = 0; i < ids.size(); ++i)
        model.assignments.emplace(ids[i], final_assignment.labels[i]);
    return model;
}

} // namespace detail

inline ClusterModel kmeans_fit(const EmbeddingMap& embeddings, const KMeansOptions& opts) {
    if (opts.k == 0) throw ConfigError("k-means: k must be positive");
    if (opts.max_iters == 0) throw ConfigError("k-means: max_iters must be positive");
    if (!(opts.tol >= 0.0)) throw ConfigError("k-means: tol must be non-negative");
    if (embeddings.empty()) throw DataError("k-means: no embeddings");

    std::vector<std::string> ids;
    std::vector<const std::vector<double>*> points;
    ids.reserve(embeddings.size());
    points.reserve(embeddings.size());
    const std::size_t dim = embeddings.begin()->second.dim();
    std::set<std::vector<double>> distinct;
    for (const auto& [id, v] : embeddings) {
        if (v.dim() != dim || dim == 0)
            throw DataError("k-means: embedding '" + id + "' has inconsistent dimension");
        if (!all_finite(v.values))
            throw DataError("k-means: embedding '" + id + "' has a non-finite value");
        ids.push_back(id);
        points.push_back(&v.values);
        distinct.insert(v.values);
    }
    if (distinct.size() < opts.k)
        throw DataError("k-means: " + std::to_string(distinct.size()) +
                        " distinct vectors, fewer than k = " + std::to_string(opts.k));

    ClusterModel best;
    const std::size_t restarts = std::max<std::size_t>(1, opts.restarts);
    for (std::size_t r = 0; r < restarts; ++r) {
        auto model = detail::fit_once(ids, points, opts, opts.seed + r);
        if (r == 0 || model.inertia < best.inertia) best = std::move(model);
    }
    return best;
}

inline Json to_json(const ClusterModel& m) {
    Json assignments = Json::object();
    for (const auto& [id, c] : m.assignments) assignments[id] = c;
    return Json{{"k", m.k},
                {"seed", m.seed},
                {"iterations", m.iterations},
                {"inertia", m.inertia},
                {"centroids", m.centroids},
                {"assignments", std::move(assignments)}};
}

inline ClusterModel cluster_model_from_json(const Json& j) {
    ClusterModel m;
    try {
        m.k = j.at("k").get<std::size_t>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
        for (auto it = j.at("assignments").begin(); it != j.at("assignments").end(); ++it)
            m.assignments[it.key()] = it.value().get<std::size_t>();
        if (j.contains("inertia")) m.inertia = j.at("inertia").get<double>();
        if (j.contains("iterations")) m.iterations = j.at("iterations").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed cluster model: ") + e.what());
    }
    if (m.centroids.size() != m.k) throw DataError("cluster model: centroid count != k");
    for (const auto& [id, c] : m.assignments)
        if (c >= m.k) throw DataError("cluster model: assignment out of range for '" + id + "'");
    return m;
}

} // namespace hetfeed
