#pragma once

// Prompt embedding vectors and their JSON-lines file contract
// {"id": string, "vector": [numbers]}.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "hetfeed/error.hpp"
#include "hetfeed/io.hpp"

namespace hetfeed {

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

using EmbeddingMap = std::map<std::string, EmbeddingVector>;

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline EmbeddingVector parse_vector(const Json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) throw DataError(where + "vector must be a non-empty array");
    EmbeddingVector out;
    out.values.reserve(v.size());
    for (const auto& x : v) {
        if (!x.is_number()) throw DataError(where + "vector contains a non-numeric value");
        const double d = x.get<double>();
        if (!std::isfinite(d)) throw DataError(where + "vector contains a non-finite value");
        out.values.push_back(d);
    }
    return out;
}

inline EmbeddingMap load_embeddings(std::istream& in, const std::string& source) {
    EmbeddingMap out;
    std::size_t dim = 0;
    for_each_line(in, [&](std::size_t number, const std::string& line) {
        const auto where = detail::at_line(source, number);
        const Json row = parse_json_line(line, source, number);
        auto id = row.find("id");
        if (id == row.end() || !id->is_string()) throw DataError(where + "missing string 'id'");
        auto vec = row.find("vector");
        if (vec == row.end()) throw DataError(where + "missing 'vector'");
        auto v = parse_vector(*vec, where);
        if (dim == 0) dim = v.dim();
        if (v.dim() != dim)
            throw DataError(where + "dimension mismatch: expected " + std::to_string(dim) +
                            ", got " + std::to_string(v.dim()));
        if (!out.emplace(id->get<std::string>(), std::move(v)).second)
            throw DataError(where + "duplicate id '" + id->get<std::string>() + "'");
    });
    return out;
}

inline EmbeddingMap load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return load_embeddings(in, path.string());
}

inline std::string serialize_embeddings(const EmbeddingMap& embeddings) {
    std::string out;
    for (const auto& [id, v] : embeddings) out += dump_line(Json{{"id", id}, {"vector", v.values}});
    return out;
}

inline void save_embeddings(const std::filesystem::path& path, const EmbeddingMap& embeddings) {
    write_file(path, serialize_embeddings(embeddings));
}

// Unit-length copies; zero vectors are left untouched.
inline EmbeddingMap normalize_embeddings(const EmbeddingMap& embeddings) {
    EmbeddingMap out = embeddings;
    for (auto& [id, v] : out) {
        double norm2 = 0.0;
        for (double x : v.values) norm2 += x * x;
        if (norm2 == 0.0) continue;
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& x : v.values) x *= inv;
    }
    return out;
}

} // namespace hetfeed
