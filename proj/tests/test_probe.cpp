#include <gtest/gtest.h>

#include <random>

#include "hetfeed/probe.hpp"
#include "hetfeed/unify.hpp"
#include "test_support.hpp"

using namespace hetfeed;

namespace {

std::vector<double> randn(std::mt19937_64& rng, std::size_t d, double sd = 1.0) {
    std::normal_distribution<double> g(0.0, sd);
    std::vector<double> v(d);
    for (auto& x : v) x = g(rng);
    return v;
}

// chosen = v + mu, rejected = v - mu
std::vector<EmbeddingPair> separable(std::mt19937_64& rng, std::size_t n, std::size_t d,
                                     std::vector<double>* mu_out = nullptr) {
    auto mu = randn(rng, d);
    double norm = 0.0;
    for (double x : mu) norm += x * x;
    for (double& x : mu) x *= 0.5 / std::sqrt(norm);
    std::vector<EmbeddingPair> pairs;
    for (std::size_t i = 0; i < n; ++i) {
        const auto v = randn(rng, d);
        EmbeddingPair p{v, v};
        for (std::size_t c = 0; c < d; ++c) {
            p.chosen[c] += mu[c];
            p.rejected[c] -= mu[c];
        }
        pairs.push_back(std::move(p));
    }
    if (mu_out) *mu_out = mu;
    return pairs;
}

std::vector<EmbeddingPair> swapped(std::vector<EmbeddingPair> pairs) {
    for (auto& p : pairs) std::swap(p.chosen, p.rejected);
    return pairs;
}

} // namespace

TEST(TrainReward, ZeroEpochsIsZeroModel) {
    std::mt19937_64 rng(1);
    const auto pairs = separable(rng, 20, 4);
    const auto m = train_reward(pairs, {.epochs = 0});
    EXPECT_EQ(m.weights, std::vector<double>(4, 0.0));
    EXPECT_EQ(m.bias, 0.0);
    EXPECT_EQ(pairwise_accuracy(m, pairs), 0.5);
}

TEST(TrainReward, SeparablePairsLearned) {
    std::mt19937_64 rng(2);
    std::vector<double> mu;
    const auto pairs = separable(rng, 500, 16, &mu);
    EXPECT_EQ(pairwise_accuracy(LinearRewardModel{mu, 0.0, 0}, pairs), 1.0);
    const auto m = train_reward(pairs, {.epochs = 200, .lr = 0.1});
    EXPECT_GE(pairwise_accuracy(m, pairs), 0.95);
}

TEST(TrainReward, SinglePairLossDecreases) {
    std::mt19937_64 rng(3);
    const auto pairs = std::vector<EmbeddingPair>{{randn(rng, 5), randn(rng, 5)}};
    std::vector<double> history;
    const auto m = train_reward(pairs, {.epochs = 1, .lr = 0.1}, &history);
    ASSERT_EQ(history.size(), 2u);
    EXPECT_LT(history[1], history[0]);
    EXPECT_EQ(history[0], pairwise_loss(LinearRewardModel{std::vector<double>(5, 0.0)}, pairs));
    EXPECT_LT(pairwise_loss(m, pairs), std::log(2.0));
}

TEST(TrainReward, LossNonIncreasingAndDeterministic) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<EmbeddingPair> pairs;
        for (int i = 0; i < 30; ++i) pairs.push_back({randn(rng, 6), randn(rng, 6)});
        std::vector<double> history;
        const auto a = train_reward(pairs, {.epochs = 100, .lr = 0.05}, &history);
        for (std::size_t i = 1; i < history.size(); ++i) EXPECT_LE(history[i], history[i - 1] + 1e-15);
        EXPECT_EQ(a, train_reward(pairs, {.epochs = 100, .lr = 0.05}));
    }
}

TEST(TrainReward, Errors) {
    EXPECT_THROW(train_reward({}, {}), DataError);
    EXPECT_THROW(train_reward({{{1, 2}, {1}}}, {}), DataError);
    EXPECT_THROW(train_reward({{{1}, {0}}}, {.lr = 0.0}), ConfigError);
    EXPECT_THROW(train_reward({{{1e308}, {-1e308}}}, {.epochs = 3, .lr = 1e10}), DataError);
    EXPECT_THROW(pairwise_accuracy(LinearRewardModel{{1, 2, 3}}, {{{1, 2}, {1, 2}}}), DataError);
}

TEST(PairwiseAccuracy, PerfectZeroAndFlipped) {
    std::mt19937_64 rng(5);
    std::vector<double> mu;
    const auto pairs = separable(rng, 100, 8, &mu);
    LinearRewardModel m{mu, 0.3, 0};
    EXPECT_EQ(pairwise_accuracy(m, pairs), 1.0);
    for (auto& w : m.weights) w = -w;
    EXPECT_EQ(pairwise_accuracy(m, pairs), 0.0);
    EXPECT_EQ(pairwise_accuracy(LinearRewardModel{std::vector<double>(8, 0.0)}, pairs), 0.5);
}

TEST(ProbeProperties, AntisymmetryOfAccuracy) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<EmbeddingPair> pairs;
        for (int i = 0; i < 25; ++i) pairs.push_back({randn(rng, 3), randn(rng, 3)});
        const LinearRewardModel m{randn(rng, 3), 0.0, 0};
        EXPECT_DOUBLE_EQ(pairwise_accuracy(m, swapped(pairs)), 1.0 - pairwise_accuracy(m, pairs));
    }
}

TEST(ProbeProperties, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(7);
    const double h = 1e-5;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t d = 1 + rng() % 6;
        std::vector<EmbeddingPair> pairs;
        for (std::size_t i = 0; i < 1 + rng() % 10; ++i) pairs.push_back({randn(rng, d), randn(rng, d)});
        const double l2 = trial % 2 ? 0.1 : 0.0;
        LinearRewardModel m{randn(rng, d), 0.0, 0};
        const auto g = pairwise_loss_gradient(m, pairs, l2);
        for (std::size_t i = 0; i < d; ++i) {
            auto plus = m, minus = m;
            plus.weights[i] += h;
            minus.weights[i] -= h;
            const double fd = (pairwise_loss(plus, pairs, l2) - pairwise_loss(minus, pairs, l2)) / (2 * h);
            const double scale = std::max({std::abs(fd), std::abs(g.weights[i]), 1e-8});
            EXPECT_LE(std::abs(fd - g.weights[i]) / scale, 1e-4) << "trial " << trial << " dim " << i;
        }
        EXPECT_EQ(g.bias, 0.0);
    }
}

TEST(ProbeProperties, TranslationInvariance) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<EmbeddingPair> pairs;
        for (int i = 0; i < 10; ++i) pairs.push_back({randn(rng, 4), randn(rng, 4)});
        auto moved = pairs;
        for (auto& p : moved) {
            const auto t = randn(rng, 4, 0.5);
            for (std::size_t c = 0; c < 4; ++c) p.chosen[c] += t[c], p.rejected[c] += t[c];
        }
        const LinearRewardModel m{randn(rng, 4), 0.0, 0};
        EXPECT_NEAR(pairwise_loss(m, pairs), pairwise_loss(m, moved), 1e-12);
        const auto ga = pairwise_loss_gradient(m, pairs), gb = pairwise_loss_gradient(m, moved);
        for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(ga.weights[c], gb.weights[c], 1e-12);
    }
}

TEST(RewardModelJson, RoundTrip) {
    const LinearRewardModel m{{0.1, -2.5e-17, 3.0}, 0.0, 42};
    const auto j = to_json(m);
    EXPECT_EQ(j["dim"], 3);
    EXPECT_EQ(reward_model_from_json(Json::parse(j.dump())), m);
    auto bad = j;
    bad["dim"] = 2;
    EXPECT_THROW(reward_model_from_json(bad), DataError);
}

TEST(EmbedPairs, LooksUpByText) {
    PreferencePair p;
    p.chosen = "good";
    p.rejected = "bad";
    const EmbeddingMap by_text{{"good", {{1, 0}}}, {"bad", {{0, 1}}}};
    const auto ep = embed_pairs(std::vector{p}, by_text);
    ASSERT_EQ(ep.size(), 1u);
    EXPECT_EQ(ep[0].chosen, (std::vector<double>{1, 0}));
    p.rejected = "missing";
    EXPECT_THROW(embed_pairs(std::vector{p}, by_text), DataError);
}
