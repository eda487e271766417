#pragma once

// Bias and generative-accuracy scoring of externally produced model outputs.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hetfeed/error.hpp"
#include "hetfeed/io.hpp"

namespace hetfeed {

struct BiasEvalItem {
    std::string id;
    double logit_pro = 0.0;
    double logit_anti = 0.0;
};

struct GenEvalItem {
    std::string id;
    std::string generation;
    std::vector<std::string> coreference_cluster;
};

namespace detail {

// log(1 + e^x) without overflow.
inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

} // namespace detail

// Base-2 entropy of the two-way softmax over (logit_pro, logit_anti).
// 1 means both readings are equally likely (no bias); 0 means certainty.
inline double pair_bias_entropy(double logit_pro, double logit_anti) {
    if (!std::isfinite(logit_pro) || !std::isfinite(logit_anti))
        throw DataError("bias logits must be finite");
    const double gap = logit_anti - logit_pro;
    // p = sigmoid(-gap), q = sigmoid(gap), via their logs for full precision
    const double log_p = -detail::softplus(gap);
    const double log_q = -detail::softplus(-gap);
    const double p = std::exp(log_p);
    const double q = std::exp(log_q);
    const double nats = -(p * log_p + q * log_q);
    return std::clamp(nats / std::numbers::ln2, 0.0, 1.0);
}

inline double pair_bias_entropy(const BiasEvalItem& item) {
    return pair_bias_entropy(item.logit_pro, item.logit_anti);
}

inline double dataset_bias(std::span<const BiasEvalItem> items) {
    if (items.empty()) throw DataError("bias evaluation needs at least one item");
    double sum = 0.0;
    for (const auto& item : items) sum += pair_bias_entropy(item);
    return sum / static_cast<double>(items.size());
}

// Lowercased tokens of the first line. ASCII letters and digits form words;
// bytes >= 0x80 count as word characters so UTF-8 words stay intact.
inline std::vector<std::string> first_line_tokens(std::string_view generation) {
    generation = generation.substr(0, generation.find('\n'));
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : generation) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline bool generative_accuracy(const GenEvalItem& item) {
    const auto tokens = first_line_tokens(item.generation);
    const std::set<std::string> present(tokens.begin(), tokens.end());
    for (const auto& word : item.coreference_cluster)
        if (present.contains(ascii_lower(word))) return true;
    return false;
}

inline double accuracy_report(std::span<const GenEvalItem> items) {
    if (items.empty()) throw DataError("generative evaluation needs at least one item");
    std::size_t hits = 0;
    for (const auto& item : items) hits += generative_accuracy(item) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(items.size());
}

inline std::vector<BiasEvalItem> load_bias_items(std::istream& in, const std::string& source) {
    std::vector<BiasEvalItem> items;
    for_each_line(in, [&](std::size_t number, const std::string& line) {
        const auto where = detail::at_line(source, number);
        const Json row = parse_json_line(line, source, number);
        BiasEvalItem item;
        try {
            item.id = row.at("id").get<std::string>();
            item.logit_pro = row.at("logit_pro").get<double>();
            item.logit_anti = row.at("logit_anti").get<double>();
        } catch (const nlohmann::json::exception&) {
            throw DataError(where + "expected {\"id\": string, \"logit_pro\": number, "
                                    "\"logit_anti\": number}");
        }
        if (!std::isfinite(item.logit_pro) || !std::isfinite(item.logit_anti))
            throw DataError(where + "non-finite logit");
        items.push_back(std::move(item));
    });
    return items;
}

inline std::vector<GenEvalItem> load_gen_items(std::istream& in, const std::string& source) {
    std::vector<GenEvalItem> items;
    for_each_line(in, [&](std::size_t number, const std::string& line) {
        const auto where = detail::at_line(source, number);
        const Json row = parse_json_line(line, source, number);
        GenEvalItem item;
        try {
            item.id = row.at("id").get<std::string>();
            item.generation = row.at("generation").get<std::string>();
            item.coreference_cluster = row.at("cluster").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception&) {
            throw DataError(where + "expected {\"id\": string, \"generation\": string, "
                                    "\"cluster\": [string, ...]}");
        }
        if (item.coreference_cluster.empty()) throw DataError(where + "empty cluster");
        for (const auto& w : item.coreference_cluster)
            if (w.empty()) throw DataError(where + "empty cluster word");
        items.push_back(std::move(item));
    });
    return items;
}

template <class Loader>
auto load_items(const std::filesystem::path& path, Loader loader) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return loader(in, path.string());
}

inline std::vector<BiasEvalItem> load_bias_items(const std::filesystem::path& path) {
    return load_items(path, [](std::istream& in, const std::string& s) {
        return load_bias_items(in, s);
    });
}

inline std::vector<GenEvalItem> load_gen_items(const std::filesystem::path& path) {
    return load_items(path, [](std::istream& in, const std::string& s) {
        return load_gen_items(in, s);
    });
}

// {"bias", "n_bias", "generative_accuracy", "n_gen"}; absent inputs give null.
inline Json evaluation_report(const std::optional<std::vector<BiasEvalItem>>& bias,
                              const std::optional<std::vector<GenEvalItem>>& gen) {
    Json r;
    r["bias"] = bias ? Json(dataset_bias(*bias)) : Json(nullptr);
    r["n_bias"] = bias ? bias->size() : 0;
    r["generative_accuracy"] = gen ? Json(accuracy_report(*gen)) : Json(nullptr);
    r["n_gen"] = gen ? gen->size() : 0;
    r["bias_aggregation"] = "mean";
    return r;
}

} // namespace hetfeed
