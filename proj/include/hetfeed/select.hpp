#pragma once

// Quality selection by score margin and diversity selection by even
// sampling across prompt-embedding clusters.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "hetfeed/corpus.hpp"
#include "hetfeed/error.hpp"
#include "hetfeed/io.hpp"
#include "hetfeed/kmeans.hpp"
#include "hetfeed/types.hpp"
#include "hetfeed/unify.hpp"

namespace hetfeed {

// Pairs the most preferred response with the least preferred one along an
// axis. Groups with a single response yield nothing. Score ties go to the
// lexicographically smallest response id.
inline std::optional<PreferencePair> best_worst_pair(const PromptWithResponses& group,
                                                     const std::string& axis,
                                                     Polarity polarity) {
    if (group.responses.size() < 2) return std::nullopt;
    std::vector<double> scores;
    scores.reserve(group.responses.size());
    for (const auto& r : group.responses) scores.push_back(detail::axis_score(r, axis));

    // Orientation where larger is better.
    auto goodness = [&](std::size_t i) {
        return polarity == Polarity::higher_is_positive ? scores[i] : -scores[i];
    };
    const auto& rs = group.responses;
    auto better = [&](std::size_t a, std::size_t b) {
        if (goodness(a) != goodness(b)) return goodness(a) > goodness(b);
        return rs[a].response_id < rs[b].response_id;
    };
    auto worse = [&](std::size_t a, std::size_t b) {
        if (goodness(a) != goodness(b)) return goodness(a) < goodness(b);
        return rs[a].response_id < rs[b].response_id;
    };

    std::size_t chosen = 0;
    for (std::size_t i = 1; i < rs.size(); ++i)
        if (better(i, chosen)) chosen = i;
    std::size_t rejected = chosen == 0 ? 1 : 0;
    for (std::size_t i = 0; i < rs.size(); ++i)
        if (i != chosen && worse(i, rejected)) rejected = i;

    if (rs[chosen].text == rs[rejected].text) return std::nullopt;

    PreferencePair p;
    p.prompt = group.prompt_text;
    p.chosen = rs[chosen].text;
    p.rejected = rs[rejected].text;
    p.margin = std::abs(scores[chosen] - scores[rejected]);
    p.source = Source::multilabel;
    p.axis = axis;
    p.prompt_id = group.prompt_id;
    p.chosen_score = scores[chosen];
    p.rejected_score = scores[rejected];
    return p;
}

inline double score_margin(const PreferencePair& pair) {
    if (pair.chosen_score && pair.rejected_score)
        return std::abs(*pair.chosen_score - *pair.rejected_score);
    return pair.margin;
}

// Margin descending, prompt_id ascending, then content for a total order.
inline bool rank_before(const PreferencePair& a, const PreferencePair& b) {
    if (a.margin != b.margin) return a.margin > b.margin;
    return std::tie(a.prompt_id, a.axis, a.chosen, a.rejected, a.prompt, a.source) <
           std::tie(b.prompt_id, b.axis, b.chosen, b.rejected, b.prompt, b.source);
}

inline void check_fraction(double p, const char* what) {
    if (!(p > 0.0 && p <= 1.0))
        throw ConfigError(std::string(what) + " must lie in (0, 1], got " + std::to_string(p));
}

inline std::vector<PreferencePair> select_top_fraction(std::vector<PreferencePair> pairs,
                                                       double p) {
    check_fraction(p, "quality fraction");
    std::sort(pairs.begin(), pairs.end(), rank_before);
    pairs.resize(ceil_fraction(p, pairs.size()));
    return pairs;
}

struct SelectionReport {
    double requested_fraction = 1.0;
    std::size_t input_count = 0;
    std::size_t target_count = 0;
    std::size_t selected_count = 0;
    std::vector<std::size_t> per_cluster_quota;  // before availability capping
    std::vector<std::size_t> per_cluster_counts; // after capping and donation
    // cluster -> source -> quota before capping (only with a source ratio)
    std::vector<std::map<Source, std::size_t>> per_cell_quota;
    // cluster -> source -> pairs available
    std::vector<std::map<Source, std::size_t>> per_cluster_sources;
    std::map<Source, std::size_t> per_source_counts;
    std::size_t discarded_single_response = 0;
};

using SourceRatio = std::map<Source, double>;

// Ratio of pair counts per source in the input, for preserving dataset sizes.
inline SourceRatio source_ratio_of(const std::vector<PreferencePair>& pairs) {
    SourceRatio r;
    for (const auto& p : pairs) r[p.source] += 1.0;
    return r;
}

namespace detail {

// Splits `total` units in proportion to `weights` by largest remainder;
// every share lies within 1 of its exact value.
inline std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
    double sum = 0.0;
    for (double w : weights) sum += w;
    std::vector<std::size_t> out(weights.size(), 0);
    if (weights.empty() || sum <= 0.0) return out;
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t given = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = static_cast<double>(total) * weights[i] / sum;
        out[i] = static_cast<std::size_t>(std::floor(exact));
        given += out[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; given < total && r < remainders.size(); ++r, ++given)
        ++out[remainders[r].second];
    return out;
}

} // namespace detail

struct DiversitySelection {
    std::vector<PreferencePair> pairs;
    SelectionReport report;
};

// Even per-cluster quotas of ceil(fraction * n) pairs in total, filled with the
// largest-margin pairs of each cluster. Clusters short of their quota donate
// the surplus one unit at a time, round-robin in cluster order. No pair is
// ever taken twice.
inline DiversitySelection diversity_sample(const std::vector<PreferencePair>& pairs,
                                           const ClusterModel& model, double fraction,
                                           const std::optional<SourceRatio>& per_source_ratio =
                                               std::nullopt) {
    check_fraction(fraction, "diversity fraction");
    const std::size_t k = model.k;
    if (k == 0) throw DataError("cluster model has k = 0");

    // Cell layout: one cell per source in the ratio, or a single pooled cell.
    std::vector<Source> cell_sources;
    std::vector<double> weights;
    if (per_source_ratio) {
        for (const auto& [s, w] : *per_source_ratio) {
            if (!(w >= 0.0) || !std::isfinite(w))
                throw ConfigError("source ratio weights must be finite and non-negative");
            cell_sources.push_back(s);
            weights.push_back(w);
        }
        // Sources outside the ratio still get a (zero-weight) cell.
        for (const auto& p : pairs)
            if (std::find(cell_sources.begin(), cell_sources.end(), p.source) ==
                cell_sources.end()) {
                cell_sources.push_back(p.source);
                weights.push_back(0.0);
            }
    }
    const std::size_t cells = per_source_ratio ? cell_sources.size() : 1;
    auto cell_of = [&](Source s) -> std::size_t {
        if (!per_source_ratio) return 0;
        return static_cast<std::size_t>(
            std::find(cell_sources.begin(), cell_sources.end(), s) - cell_sources.begin());
    };

    std::vector<std::vector<std::vector<std::size_t>>> buckets(
        k, std::vector<std::vector<std::size_t>>(cells));
    SelectionReport report;
    report.requested_fraction = fraction;
    report.input_count = pairs.size();
    report.per_cluster_sources.assign(k, {});
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto c = model.cluster_of(pairs[i].prompt_id);
        if (c >= k) throw DataError("assignment out of range for '" + pairs[i].prompt_id + "'");
        buckets[c][cell_of(pairs[i].source)].push_back(i);
        ++report.per_cluster_sources[c][pairs[i].source];
    }
    for (auto& cluster : buckets)
        for (auto& cell : cluster)
            std::sort(cell.begin(), cell.end(), [&](std::size_t a, std::size_t b) {
                return rank_before(pairs[a], pairs[b]);
            });

    const std::size_t target = ceil_fraction(fraction, pairs.size());
    report.target_count = target;

    report.per_cluster_quota.resize(k);
    for (std::size_t c = 0; c < k; ++c)
        report.per_cluster_quota[c] = target / k + (c < target % k ? 1 : 0);

    std::vector<std::vector<std::size_t>> take(k, std::vector<std::size_t>(cells, 0));
    std::size_t taken = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const auto quotas = per_source_ratio
                                ? detail::apportion(report.per_cluster_quota[c], weights)
                                : std::vector<std::size_t>{report.per_cluster_quota[c]};
        if (per_source_ratio) {
            std::map<Source, std::size_t> cell_quota;
            for (std::size_t s = 0; s < cells; ++s) cell_quota[cell_sources[s]] = quotas[s];
            report.per_cell_quota.push_back(std::move(cell_quota));
        }
        for (std::size_t s = 0; s < cells; ++s) {
            take[c][s] = std::min(quotas[s], buckets[c][s].size());
            taken += take[c][s];
        }
    }

    // Round-robin donation of the shortfall to clusters with spare pairs.
    // Within a cluster the unit goes to the cell furthest below its share.
    auto spare = [&](std::size_t c, std::size_t s) { return buckets[c][s].size() > take[c][s]; };
    while (taken < target) {
        bool progressed = false;
        for (std::size_t c = 0; c < k && taken < target; ++c) {
            std::size_t best = cells;
            double best_deficit = 0.0;
            std::size_t cluster_total = 0;
            for (std::size_t s = 0; s < cells; ++s) cluster_total += take[c][s];
            double wsum = 0.0;
            for (double w : weights) wsum += w;
            for (std::size_t s = 0; s < cells; ++s) {
                if (!spare(c, s)) continue;
                const double share =
                    per_source_ratio && wsum > 0.0
                        ? static_cast<double>(cluster_total + 1) * weights[s] / wsum
                        : 0.0;
                const double deficit = share - static_cast<double>(take[c][s]);
                if (best == cells || deficit > best_deficit) {
                    best = s;
                    best_deficit = deficit;
                }
            }
            if (best == cells) continue;
            ++take[c][best];
            ++taken;
            progressed = true;
        }
        if (!progressed) break;
    }

    DiversitySelection out;
    report.per_cluster_counts.assign(k, 0);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t s = 0; s < cells; ++s)
            for (std::size_t r = 0; r < take[c][s]; ++r) {
                const auto& p = pairs[buckets[c][s][r]];
                out.pairs.push_back(p);
                ++report.per_cluster_counts[c];
                ++report.per_source_counts[p.source];
            }
    std::sort(out.pairs.begin(), out.pairs.end(), rank_before);
    report.selected_count = out.pairs.size();
    out.report = std::move(report);
    return out;
}

inline Json to_json(const SelectionReport& r) {
    auto source_map = [](const std::map<Source, std::size_t>& m) {
        Json j = Json::object();
        for (const auto& [s, n] : m) j[std::string(to_string(s))] = n;
        return j;
    };
    Json cells = Json::array();
    for (const auto& m : r.per_cell_quota) cells.push_back(source_map(m));
    Json composition = Json::array();
    for (const auto& m : r.per_cluster_sources) composition.push_back(source_map(m));
    return Json{{"requested_fraction", r.requested_fraction},
                {"input_count", r.input_count},
                {"target_count", r.target_count},
                {"selected_count", r.selected_count},
                {"per_cluster_quota", r.per_cluster_quota},
                {"per_cluster_counts", r.per_cluster_counts},
                {"per_cell_quota", std::move(cells)},
                {"per_cluster_sources", std::move(composition)},
                {"per_source_counts", source_map(r.per_source_counts)},
                {"discarded_single_response", r.discarded_single_response}};
}

} // namespace hetfeed
