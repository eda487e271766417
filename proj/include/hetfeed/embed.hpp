#pragma once

// Prompt embeddings from a precomputed file or from an HTTP service
// speaking POST {"texts": [...]} -> {"vectors": [[...], ...]}.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <future>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"

#include "hetfeed/embedding.hpp"
#include "hetfeed/error.hpp"
#include "hetfeed/io.hpp"

namespace hetfeed {

inline constexpr std::size_t minilm_dim = 384;

struct HttpReply {
    int status = 0;
    std::string body;
};

// Sends one JSON request body; throws on transport failure.
using EmbedTransport = std::function<HttpReply(const std::string& body)>;

struct EmbeddingProviderConfig {
    enum class Kind { file, http };

    Kind kind = Kind::file;
    std::filesystem::path path;       // file
    std::string endpoint;             // http
    std::size_t batch_size = 32;
    std::chrono::milliseconds timeout{30000};
    std::size_t max_retries = 3;
    std::chrono::milliseconds backoff{200}; // doubled after every failed attempt
    std::size_t max_in_flight = 1;
    std::string model;
    std::optional<std::size_t> expected_dim;

    // Explicit dimension, else 384 for MiniLM-family models, else unknown.
    std::optional<std::size_t> resolved_dim() const {
        if (expected_dim) return expected_dim;
        if (model.find("MiniLM") != std::string::npos) return minilm_dim;
        return std::nullopt;
    }
};

using TextList = std::vector<std::pair<std::string, std::string>>; // (id, text)

struct Endpoint {
    std::string scheme_host_port;
    std::string path;
};

inline Endpoint split_endpoint(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos || url.compare(0, scheme, "http") != 0)
        throw ConfigError("embedding endpoint must be an http:// URL, got '" + url + "'");
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

inline EmbedTransport make_http_transport(const std::string& url,
                                          std::chrono::milliseconds timeout) {
    auto ep = split_endpoint(url);
    return [ep, timeout](const std::string& body) {
        httplib::Client cli(ep.scheme_host_port);
        cli.set_connection_timeout(timeout);
        cli.set_read_timeout(timeout);
        cli.set_write_timeout(timeout);
        auto res = cli.Post(ep.path, body, "application/json");
        if (!res) throw RemoteError("HTTP request failed: " + httplib::to_string(res.error()));
        return HttpReply{res->status, res->body};
    };
}

namespace detail {

inline std::vector<std::vector<double>> request_batch(const EmbeddingProviderConfig& cfg,
                                                      const EmbedTransport& transport,
                                                      const TextList& texts, std::size_t begin,
                                                      std::size_t end) {
    Json body{{"texts", Json::array()}};
    for (std::size_t i = begin; i < end; ++i) body["texts"].push_back(texts[i].second);
    const std::string payload = body.dump();

    std::string last_error;
    auto delay = cfg.backoff;
    for (std::size_t attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
        HttpReply reply;
        try {
            reply = transport(payload);
        } catch (const std::exception& e) {
            last_error = e.what();
            continue;
        }
        if (reply.status != 200) {
            last_error = "status " + std::to_string(reply.status);
            continue;
        }
        Json parsed;
        try {
            parsed = Json::parse(reply.body);
        } catch (const nlohmann::json::exception& e) {
            throw RemoteError(std::string("embedding service returned malformed JSON: ") +
                              e.what());
        }
        auto vectors = parsed.find("vectors");
        if (vectors == parsed.end() || !vectors->is_array())
            throw RemoteError("embedding service response lacks a 'vectors' array");
        if (vectors->size() != end - begin)
            throw RemoteError("embedding service count mismatch: sent " +
                              std::to_string(end - begin) + " texts, got " +
                              std::to_string(vectors->size()) + " vectors");
        std::vector<std::vector<double>> out;
        out.reserve(vectors->size());
        for (const auto& v : *vectors) {
            try {
                out.push_back(parse_vector(v, "embedding service: ").values);
            } catch (const DataError& e) {
                throw RemoteError(e.what());
            }
        }
        return out;
    }
    throw RemoteError("embedding request for items [" + std::to_string(begin) + ", " +
                      std::to_string(end) + ") failed after " +
                      std::to_string(cfg.max_retries + 1) + " attempts: " + last_error);
}

} // namespace detail

// Batches go out in input order, at most max_in_flight at a time, and are
// reassembled by batch index so completion order never shows in the output.
inline EmbeddingMap fetch_embeddings(const EmbeddingProviderConfig& cfg, const TextList& texts,
                                     const EmbedTransport& transport) {
    if (cfg.batch_size == 0) throw ConfigError("embedding batch size must be at least 1");
    std::set<std::string> ids;
    for (const auto& [id, text] : texts)
        if (!ids.insert(id).second) throw DataError("duplicate embedding id '" + id + "'");

    const std::size_t n = texts.size();
    const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
    std::vector<std::vector<std::vector<double>>> results(batches);
    const std::size_t in_flight = std::max<std::size_t>(1, cfg.max_in_flight);

    for (std::size_t wave = 0; wave < batches; wave += in_flight) {
        const std::size_t wave_end = std::min(batches, wave + in_flight);
        if (in_flight == 1) {
            const std::size_t b = wave;
            results[b] = detail::request_batch(cfg, transport, texts, b * cfg.batch_size,
                                               std::min(n, (b + 1) * cfg.batch_size));
            continue;
        }
        std::vector<std::future<std::vector<std::vector<double>>>> futures;
        for (std::size_t b = wave; b < wave_end; ++b)
            futures.push_back(std::async(std::launch::async, detail::request_batch,
                                         std::cref(cfg), std::cref(transport), std::cref(texts),
                                         b * cfg.batch_size,
                                         std::min(n, (b + 1) * cfg.batch_size)));
        for (std::size_t b = wave; b < wave_end; ++b) results[b] = futures[b - wave].get();
    }

    EmbeddingMap out;
    auto dim = cfg.resolved_dim();
    std::size_t i = 0;
    for (auto& batch : results)
        for (auto& v : batch) {
            if (!dim) dim = v.size();
            if (v.size() != *dim)
                throw RemoteError("embedding for '" + texts[i].first + "' has dimension " +
                                  std::to_string(v.size()) + ", expected " +
                                  std::to_string(*dim));
            out.emplace(texts[i].first, EmbeddingVector{std::move(v)});
            ++i;
        }
    return out;
}

inline EmbeddingMap fetch_embeddings(const EmbeddingProviderConfig& cfg, const TextList& texts) {
    return fetch_embeddings(cfg, texts, make_http_transport(cfg.endpoint, cfg.timeout));
}

// File or HTTP provider; every requested id must come back.
inline EmbeddingMap provide_embeddings(const EmbeddingProviderConfig& cfg, const TextList& texts) {
    if (cfg.kind == EmbeddingProviderConfig::Kind::http) return fetch_embeddings(cfg, texts);
    auto all = load_embeddings(cfg.path);
    EmbeddingMap out;
    for (const auto& [id, text] : texts) {
        auto it = all.find(id);
        if (it == all.end())
            throw DataError("no embedding for '" + id + "' in '" + cfg.path.string() + "'");
        if (auto dim = cfg.resolved_dim(); dim && it->second.dim() != *dim)
            throw DataError("embedding for '" + id + "' has dimension " +
                            std::to_string(it->second.dim()) + ", expected " +
                            std::to_string(*dim));
        out.emplace(id, it->second);
    }
    return out;
}

} // namespace hetfeed
