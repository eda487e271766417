#pragma once

// Reduction of both feedback shapes to binary supervision: +/-1 labeled
// examples ("simple unionization") or preference pairs, plus their union.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "hetfeed/corpus.hpp"
#include "hetfeed/error.hpp"
#include "hetfeed/io.hpp"
#include "hetfeed/render.hpp"
#include "hetfeed/types.hpp"

namespace hetfeed {

struct LabeledExample {
    std::string prompt;
    std::string response;
    Reward reward = Reward::negative;
    Source source = Source::multilabel;
    std::optional<std::string> axis;
    std::string prompt_id;

    bool operator==(const LabeledExample&) const = default;
};

struct PreferencePair {
    std::string prompt;
    std::string chosen;
    std::string rejected;
    double margin = 0.0;
    Source source = Source::multilabel;
    std::optional<std::string> axis;
    std::string prompt_id;
    // Axis scores of the two responses when known (not serialized).
    std::optional<double> chosen_score;
    std::optional<double> rejected_score;

    bool operator==(const PreferencePair&) const = default;
};

struct CutoffStrategy {
    enum class Kind { threshold, median, quartiles };

    Kind kind = Kind::threshold;
    double delta = 0.5;

    static CutoffStrategy threshold(double delta) { return {Kind::threshold, delta}; }
    static CutoffStrategy median() { return {Kind::median, 0.0}; }
    static CutoffStrategy quartiles() { return {Kind::quartiles, 0.0}; }
};

enum class CutoffScope { group, corpus };

// Cutoff statistics resolved against a concrete score list.
struct ResolvedCutoff {
    CutoffStrategy::Kind kind = CutoffStrategy::Kind::threshold;
    double lower = 0.5; // Q1 for quartiles, otherwise equal to upper
    double upper = 0.5;
};

using BinaryLabel = std::optional<Reward>;

namespace detail {

inline void check_scores(std::span<const double> scores) {
    for (double s : scores)
        if (!std::isfinite(s) || s < 0.0 || s > 1.0)
            throw DataError("score outside [0,1]: " + std::to_string(s));
}

// Type-1 (inverse empirical CDF) quantile of a sorted, non-empty list.
inline double quantile_type1(const std::vector<double>& sorted, double p) {
    const double np = p * static_cast<double>(sorted.size());
    const auto j = static_cast<std::size_t>(std::floor(np));
    if (np - static_cast<double>(j) > 0.0) return sorted[j];
    return sorted[j == 0 ? 0 : j - 1];
}

} // namespace detail

inline ResolvedCutoff resolve_cutoff(std::span<const double> scores,
                                     const CutoffStrategy& strategy) {
    detail::check_scores(scores);
    using Kind = CutoffStrategy::Kind;
    if (strategy.kind == Kind::threshold) {
        if (!std::isfinite(strategy.delta) || strategy.delta < 0.0 || strategy.delta > 1.0)
            throw ConfigError("threshold delta must be a finite value in [0,1]");
        return {Kind::threshold, strategy.delta, strategy.delta};
    }
    if (scores.empty())
        throw DataError("median/quartile cutoff undefined for an empty score list");
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    if (strategy.kind == Kind::median) {
        const double m =
            n % 2 == 1 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
        return {Kind::median, m, m};
    }
    return {Kind::quartiles, detail::quantile_type1(sorted, 0.25),
            detail::quantile_type1(sorted, 0.75)};
}

inline BinaryLabel apply_cutoff(double score, const ResolvedCutoff& cut, Polarity polarity) {
    BinaryLabel label;
    if (cut.kind == CutoffStrategy::Kind::quartiles) {
        if (score >= cut.upper)
            label = Reward::positive;
        else if (score <= cut.lower)
            label = Reward::negative;
    } else {
        label = score > cut.upper ? Reward::positive : Reward::negative;
    }
    if (label && polarity == Polarity::lower_is_positive) label = negate(*label);
    return label;
}

inline std::vector<BinaryLabel> binarize(std::span<const double> scores,
                                         const CutoffStrategy& strategy,
                                         Polarity polarity = Polarity::higher_is_positive) {
    const auto cut = resolve_cutoff(scores, strategy);
    std::vector<BinaryLabel> out;
    out.reserve(scores.size());
    for (double s : scores) out.push_back(apply_cutoff(s, cut, polarity));
    return out;
}

using PolarityMap = std::map<std::string, Polarity>;

namespace detail {

inline Polarity polarity_for(const PolarityMap& polarities, const std::string& axis) {
    auto it = polarities.find(axis);
    if (it == polarities.end())
        throw ConfigError("no polarity declared for label axis '" + axis + "'");
    return it->second;
}

inline double axis_score(const Response& r, const std::string& axis) {
    auto it = r.labels.find(axis);
    if (it == r.labels.end())
        throw DataError("response '" + r.response_id + "' has no score for axis '" + axis +
                        "'");
    return it->second;
}

inline void emit_axis(const PromptWithResponses& group, const std::string& axis,
                      const ResolvedCutoff& cut, Polarity polarity,
                      std::vector<LabeledExample>& out) {
    for (const auto& r : group.responses) {
        if (auto label = apply_cutoff(axis_score(r, axis), cut, polarity))
            out.push_back({group.prompt_text, r.text, *label, Source::multilabel, axis,
                           group.prompt_id});
    }
}

inline std::vector<double> group_scores(const PromptWithResponses& group,
                                        const std::string& axis) {
    std::vector<double> scores;
    scores.reserve(group.responses.size());
    for (const auto& r : group.responses) scores.push_back(axis_score(r, axis));
    return scores;
}

} // namespace detail

// One labeled example per (axis, response) whose binarized label survives;
// cutoff statistics come from this group's own scores.
inline std::vector<LabeledExample> expand_multilabel(const PromptWithResponses& group,
                                                     const std::vector<std::string>& axes,
                                                     const CutoffStrategy& strategy,
                                                     const PolarityMap& polarities) {
    std::vector<LabeledExample> out;
    for (const auto& axis : axes) {
        const auto polarity = detail::polarity_for(polarities, axis);
        const auto cut = resolve_cutoff(detail::group_scores(group, axis), strategy);
        detail::emit_axis(group, axis, cut, polarity, out);
    }
    return out;
}

// Corpus-level expansion. With CutoffScope::corpus the median/quartiles of an
// axis are taken over every response in every group.
inline std::vector<LabeledExample> expand_multilabel(
    const std::vector<PromptWithResponses>& groups, const std::vector<std::string>& axes,
    const CutoffStrategy& strategy, const PolarityMap& polarities, CutoffScope scope) {
    std::vector<LabeledExample> out;
    if (scope == CutoffScope::group) {
        for (const auto& g : groups) {
            auto part = expand_multilabel(g, axes, strategy, polarities);
            out.insert(out.end(), std::make_move_iterator(part.begin()),
                       std::make_move_iterator(part.end()));
        }
        return out;
    }
    std::map<std::string, ResolvedCutoff> cuts;
    for (const auto& axis : axes) {
        std::vector<double> all;
        for (const auto& g : groups) {
            auto s = detail::group_scores(g, axis);
            all.insert(all.end(), s.begin(), s.end());
        }
        if (all.empty() && strategy.kind != CutoffStrategy::Kind::threshold) continue;
        cuts[axis] = resolve_cutoff(all, strategy);
    }
    for (const auto& g : groups)
        for (const auto& axis : axes)
            detail::emit_axis(g, axis, cuts.at(axis), detail::polarity_for(polarities, axis), out);
    return out;
}

inline std::vector<LabeledExample> expand_choice(const ChoicePairRecord& record,
                                                 std::string_view blank_marker =
                                                     default_blank_marker) {
    auto make = [&](const std::string& option, int index) {
        return LabeledExample{render_choice(record.sentence, option, blank_marker),
                              option,
                              index == record.answer_index ? Reward::positive : Reward::negative,
                              Source::choice,
                              std::nullopt,
                              record.id};
    };
    return {make(record.option0, 0), make(record.option1, 1)};
}

// Binary supervision carries no magnitude, so the margin is fixed at 1.
inline PreferencePair choice_to_preference(const ChoicePairRecord& record,
                                           std::string_view blank_marker =
                                               default_blank_marker) {
    PreferencePair p;
    p.prompt = record.sentence;
    p.chosen = render_choice(record.sentence, record.correct(), blank_marker);
    p.rejected = render_choice(record.sentence, record.incorrect(), blank_marker);
    p.margin = 1.0;
    p.source = Source::choice;
    p.prompt_id = record.id;
    return p;
}

template <class Record>
struct UnionResult {
    std::vector<Record> records;
    std::map<Source, std::size_t> per_source;
    std::size_t duplicates_removed = 0;
};

namespace detail {

inline auto sort_key(const PreferencePair& p) {
    return std::tie(p.prompt_id, p.axis, p.prompt, p.chosen, p.rejected, p.margin, p.source,
                    p.chosen_score, p.rejected_score);
}

inline auto sort_key(const LabeledExample& e) {
    return std::tie(e.prompt_id, e.axis, e.prompt, e.response, e.reward, e.source);
}

inline auto dedup_key(const PreferencePair& p) {
    return std::make_tuple(p.prompt, p.chosen, p.rejected, p.axis);
}

inline auto dedup_key(const LabeledExample& e) {
    return std::make_tuple(e.prompt, e.response, to_int(e.reward), e.axis);
}

} // namespace detail

// Set union of the parts: exact duplicates collapse, output is ordered by
// (prompt_id, axis) with remaining fields as tie-breakers, so the result does
// not depend on part order.
template <class Record>
UnionResult<Record> take_union(const std::vector<std::vector<Record>>& parts) {
    std::vector<Record> all;
    for (const auto& part : parts) all.insert(all.end(), part.begin(), part.end());
    std::sort(all.begin(), all.end(), [](const Record& a, const Record& b) {
        return detail::sort_key(a) < detail::sort_key(b);
    });
    UnionResult<Record> out;
    std::set<decltype(detail::dedup_key(std::declval<const Record&>()))> seen;
    for (auto& r : all) {
        if (!seen.insert(detail::dedup_key(r)).second) {
            ++out.duplicates_removed;
            continue;
        }
        ++out.per_source[r.source];
        out.records.push_back(std::move(r));
    }
    return out;
}

using CorpusPart = std::variant<std::vector<PreferencePair>, std::vector<LabeledExample>>;
using UnifiedCorpus = std::variant<UnionResult<PreferencePair>, UnionResult<LabeledExample>>;

// Dynamically typed union; all parts must hold the same record kind.
inline UnifiedCorpus take_union(const std::vector<CorpusPart>& parts) {
    if (parts.empty()) return UnionResult<PreferencePair>{};
    const auto kind = parts.front().index();
    for (const auto& p : parts)
        if (p.index() != kind)
            throw DataError("cannot union mixed record kinds (preference pairs and labeled "
                            "examples)");
    if (kind == 0) {
        std::vector<std::vector<PreferencePair>> typed;
        for (const auto& p : parts) typed.push_back(std::get<0>(p));
        return take_union(typed);
    }
    std::vector<std::vector<LabeledExample>> typed;
    for (const auto& p : parts) typed.push_back(std::get<1>(p));
    return take_union(typed);
}

// Unified corpus JSON-lines schema.
inline Json to_json(const PreferencePair& p) {
    return Json{{"prompt", p.prompt},
                {"chosen", p.chosen},
                {"rejected", p.rejected},
                {"margin", p.margin},
                {"source", to_string(p.source)},
                {"axis", p.axis ? Json(*p.axis) : Json(nullptr)},
                {"prompt_id", p.prompt_id}};
}

inline Json to_json(const LabeledExample& e) {
    return Json{{"prompt", e.prompt},
                {"response", e.response},
                {"reward", to_int(e.reward)},
                {"source", to_string(e.source)},
                {"axis", e.axis ? Json(*e.axis) : Json(nullptr)},
                {"prompt_id", e.prompt_id}};
}

inline CorpusPart read_unified(std::istream& in, const std::string& source) {
    std::vector<PreferencePair> pairs;
    std::vector<LabeledExample> examples;
    for_each_line(in, [&](std::size_t number, const std::string& line) {
        const auto where = detail::at_line(source, number);
        const Json row = parse_json_line(line, source, number);
        std::optional<std::string> axis;
        if (auto it = row.find("axis"); it != row.end() && !it->is_null()) {
            if (!it->is_string()) throw DataError(where + "axis must be a string or null");
            axis = it->get<std::string>();
        }
        Source src;
        try {
            src = parse_source(detail::require_string(row, "source", where));
        } catch (const DataError& e) {
            throw DataError(where + e.what());
        }
        if (row.contains("chosen")) {
            PreferencePair p;
            p.prompt = detail::require_string(row, "prompt", where);
            p.chosen = detail::require_string(row, "chosen", where);
            p.rejected = detail::require_string(row, "rejected", where);
            const Json& m = detail::require(row, "margin", where);
            if (!m.is_number() || !std::isfinite(m.get<double>()) || m.get<double>() < 0.0)
                throw DataError(where + "margin must be a non-negative number");
            p.margin = m.get<double>();
            p.source = src;
            p.axis = axis;
            p.prompt_id = detail::require_string(row, "prompt_id", where);
            pairs.push_back(std::move(p));
        } else {
            LabeledExample e;
            e.prompt = detail::require_string(row, "prompt", where);
            e.response = detail::require_string(row, "response", where);
            const Json& r = detail::require(row, "reward", where);
            if (!r.is_number_integer() || (r.get<int>() != 1 && r.get<int>() != -1))
                throw DataError(where + "reward must be +1 or -1");
            e.reward = static_cast<Reward>(r.get<int>());
            e.source = src;
            e.axis = axis;
            e.prompt_id = detail::require_string(row, "prompt_id", where);
            examples.push_back(std::move(e));
        }
        if (!pairs.empty() && !examples.empty())
            throw DataError(where + "file mixes preference pairs and labeled examples");
    });
    if (!examples.empty()) return examples;
    return pairs;
}

inline CorpusPart read_unified(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return read_unified(in, path.string());
}

inline std::vector<PreferencePair> read_preference_pairs(const std::filesystem::path& path) {
    auto part = read_unified(path);
    if (auto* p = std::get_if<std::vector<PreferencePair>>(&part)) return std::move(*p);
    throw DataError("'" + path.string() + "' holds labeled examples, expected preference pairs");
}

} // namespace hetfeed
