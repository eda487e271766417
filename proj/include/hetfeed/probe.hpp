#pragma once

// Linear pairwise reward probe: r(x) = w.x + b trained with the pairwise
// logistic loss  L = mean -log sigmoid(r(chosen) - r(rejected)).
//
// The loss only sees chosen - rejected, so b cancels and stays at its zero
// initialization; it is kept for the exported model shape.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hetfeed/embedding.hpp"
#include "hetfeed/error.hpp"
#include "hetfeed/io.hpp"

namespace hetfeed {

struct EmbeddingPair {
    std::vector<double> chosen;
    std::vector<double> rejected;
};

struct LinearRewardModel {
    std::vector<double> weights;
    double bias = 0.0;
    std::uint64_t seed = 0;

    double reward(const std::vector<double>& x) const {
        double s = bias;
        for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * x[i];
        return s;
    }

    bool operator==(const LinearRewardModel&) const = default;
};

struct ProbeOptions {
    std::size_t epochs = 200;
    double lr = 0.1;
    std::uint64_t seed = 0;
    double l2 = 0.0;
};

struct LossGradient {
    std::vector<double> weights;
    double bias = 0.0;
};

namespace detail {

inline std::size_t pair_dim(const std::vector<EmbeddingPair>& pairs) {
    if (pairs.empty()) throw DataError("probe needs at least one pair");
    const std::size_t d = pairs.front().chosen.size();
    if (d == 0) throw DataError("probe embeddings must be non-empty");
    for (const auto& p : pairs)
        if (p.chosen.size() != d || p.rejected.size() != d)
            throw DataError("probe embedding dimension mismatch");
    return d;
}

inline void check_model_dim(const LinearRewardModel& m, std::size_t d) {
    if (m.weights.size() != d)
        throw DataError("probe model dimension " + std::to_string(m.weights.size()) +
                        " does not match embeddings of dimension " + std::to_string(d));
}

// w . (chosen - rejected)
inline double reward_gap(const LinearRewardModel& m, const EmbeddingPair& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.weights.size(); ++i)
        s += m.weights[i] * (p.chosen[i] - p.rejected[i]);
    return s;
}

inline double softplus_neg(double s) { // log(1 + e^{-s})
    return s > 0.0 ? std::log1p(std::exp(-s)) : -s + std::log1p(std::exp(s));
}

inline double sigmoid_neg(double s) { // 1 / (1 + e^{s})
    if (s > 0.0) {
        const double e = std::exp(-s);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(s));
}

} // namespace detail

inline double pairwise_loss(const LinearRewardModel& m, const std::vector<EmbeddingPair>& pairs,
                            double l2 = 0.0) {
    detail::check_model_dim(m, detail::pair_dim(pairs));
    double sum = 0.0;
    for (const auto& p : pairs) sum += detail::softplus_neg(detail::reward_gap(m, p));
    double loss = sum / static_cast<double>(pairs.size());
    if (l2 > 0.0) {
        double norm2 = 0.0;
        for (double w : m.weights) norm2 += w * w;
        loss += 0.5 * l2 * norm2;
    }
    return loss;
}

inline LossGradient pairwise_loss_gradient(const LinearRewardModel& m,
                                           const std::vector<EmbeddingPair>& pairs,
                                           double l2 = 0.0) {
    const std::size_t d = detail::pair_dim(pairs);
    detail::check_model_dim(m, d);
    LossGradient g{std::vector<double>(d, 0.0), 0.0};
    for (const auto& p : pairs) {
        const double coeff = -detail::sigmoid_neg(detail::reward_gap(m, p));
        for (std::size_t i = 0; i < d; ++i) g.weights[i] += coeff * (p.chosen[i] - p.rejected[i]);
    }
    const double inv_n = 1.0 / static_cast<double>(pairs.size());
    for (std::size_t i = 0; i < d; ++i) {
        g.weights[i] = g.weights[i] * inv_n + l2 * m.weights[i];
        if (!std::isfinite(g.weights[i])) throw DataError("probe gradient is not finite");
    }
    return g;
}

// Full-batch gradient descent from zero parameters; pairs are summed in input
// order, so runs are reproducible bit for bit.
inline LinearRewardModel train_reward(const std::vector<EmbeddingPair>& pairs,
                                      const ProbeOptions& opts,
                                      std::vector<double>* loss_history = nullptr) {
    if (!(opts.lr > 0.0) || !std::isfinite(opts.lr))
        throw ConfigError("probe learning rate must be positive");
    if (opts.l2 < 0.0) throw ConfigError("probe l2 must be non-negative");
    const std::size_t d = detail::pair_dim(pairs);
    LinearRewardModel m{std::vector<double>(d, 0.0), 0.0, opts.seed};
    if (loss_history) loss_history->push_back(pairwise_loss(m, pairs, opts.l2));
    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        const auto g = pairwise_loss_gradient(m, pairs, opts.l2);
        for (std::size_t i = 0; i < d; ++i) m.weights[i] -= opts.lr * g.weights[i];
        m.bias -= opts.lr * g.bias;
        if (loss_history) loss_history->push_back(pairwise_loss(m, pairs, opts.l2));
    }
    return m;
}

// Fraction of pairs ranked correctly; exact ties count one half.
inline double pairwise_accuracy(const LinearRewardModel& m,
                                const std::vector<EmbeddingPair>& pairs) {
    detail::check_model_dim(m, detail::pair_dim(pairs));
    double score = 0.0;
    for (const auto& p : pairs) {
        const double s = detail::reward_gap(m, p);
        score += s > 0.0 ? 1.0 : (s == 0.0 ? 0.5 : 0.0);
    }
    return score / static_cast<double>(pairs.size());
}

inline Json to_json(const LinearRewardModel& m) {
    return Json{{"weights", m.weights}, {"bias", m.bias}, {"dim", m.weights.size()},
                {"seed", m.seed}};
}

inline LinearRewardModel reward_model_from_json(const Json& j) {
    LinearRewardModel m;
    try {
        m.weights = j.at("weights").get<std::vector<double>>();
        m.bias = j.at("bias").get<double>();
        m.seed = j.at("seed").get<std::uint64_t>();
        if (j.at("dim").get<std::size_t>() != m.weights.size())
            throw DataError("probe model: dim does not match weights");
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed probe model: ") + e.what());
    }
    return m;
}

// Looks up chosen/rejected embeddings keyed by response text.
template <class PairRange>
std::vector<EmbeddingPair> embed_pairs(const PairRange& pairs, const EmbeddingMap& by_text) {
    std::vector<EmbeddingPair> out;
    auto lookup = [&](const std::string& text) -> const std::vector<double>& {
        auto it = by_text.find(text);
        if (it == by_text.end())
            throw DataError("no probe embedding for response text '" + text.substr(0, 60) + "'");
        return it->second.values;
    };
    for (const auto& p : pairs) out.push_back({lookup(p.chosen), lookup(p.rejected)});
    return out;
}

} // namespace hetfeed
