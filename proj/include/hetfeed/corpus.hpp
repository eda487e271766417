#pragma once

// Ingestion of the two feedback formats: conversation trees whose messages
// carry named score vectors, and two-option fill-in-the-blank records.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hetfeed/error.hpp"
#include "hetfeed/io.hpp"
#include "hetfeed/types.hpp"

namespace hetfeed {

inline constexpr std::string_view default_blank_marker = "_";

using LabelMap = std::map<std::string, double>;

struct MultiLabelRecord {
    std::string id;
    std::optional<std::string> parent_id;
    Role role = Role::prompter;
    std::string text;
    LabelMap labels;

    bool operator==(const MultiLabelRecord&) const = default;
};

struct ChoicePairRecord {
    std::string id;
    std::string sentence;
    std::string option0;
    std::string option1;
    int answer_index = 0;

    const std::string& correct() const { return answer_index == 0 ? option0 : option1; }
    const std::string& incorrect() const { return answer_index == 0 ? option1 : option0; }

    bool operator==(const ChoicePairRecord&) const = default;
};

struct Response {
    std::string response_id;
    std::string text;
    LabelMap labels;

    bool operator==(const Response&) const = default;
};

// A parent message and its direct children.
struct PromptWithResponses {
    std::string prompt_id;
    std::string prompt_text;
    std::vector<Response> responses;

    bool operator==(const PromptWithResponses&) const = default;
};

struct ParseStats {
    std::size_t lines = 0;
    std::size_t unknown_keys = 0;
};

// Non-overlapping occurrences of marker in text.
inline std::size_t count_occurrences(std::string_view text, std::string_view marker) {
    if (marker.empty()) return 0;
    std::size_t count = 0;
    for (auto pos = text.find(marker); pos != std::string_view::npos;
         pos = text.find(marker, pos + marker.size()))
        ++count;
    return count;
}

namespace detail {

inline const Json& require(const Json& row, const char* key, const std::string& where) {
    auto it = row.find(key);
    if (it == row.end()) throw DataError(where + "missing key '" + key + "'");
    return *it;
}

inline std::string require_string(const Json& row, const char* key, const std::string& where) {
    const Json& v = require(row, key, where);
    if (!v.is_string()) throw DataError(where + "key '" + key + "' must be a string");
    return v.get<std::string>();
}

inline void count_unknown(const Json& row, std::initializer_list<std::string_view> known,
                          ParseStats& stats) {
    for (auto it = row.begin(); it != row.end(); ++it) {
        bool found = false;
        for (auto k : known) found = found || it.key() == k;
        if (!found) ++stats.unknown_keys;
    }
}

// Rejects parent cycles. Assumes every parent id resolves.
inline void check_forest(const std::vector<MultiLabelRecord>& records,
                         const std::unordered_map<std::string, std::size_t>& index) {
    // 0 = unvisited, 1 = on current path, 2 = known to reach a root
    std::vector<char> state(records.size(), 0);
    std::vector<std::size_t> path;
    for (std::size_t start = 0; start < records.size(); ++start) {
        path.clear();
        std::size_t cur = start;
        while (state[cur] == 0) {
            state[cur] = 1;
            path.push_back(cur);
            const auto& parent = records[cur].parent_id;
            if (!parent) break;
            cur = index.at(*parent);
            if (state[cur] == 1)
                throw DataError("parent cycle through record '" + records[cur].id + "'");
        }
        for (auto p : path) state[p] = 2;
    }
}

} // namespace detail

inline MultiLabelRecord parse_multilabel_row(const Json& row, const std::string& where,
                                             ParseStats& stats) {
    detail::count_unknown(row, {"id", "parent_id", "role", "text", "labels"}, stats);
    MultiLabelRecord rec;
    rec.id = detail::require_string(row, "id", where);
    if (rec.id.empty()) throw DataError(where + "empty id");
    if (auto it = row.find("parent_id"); it != row.end() && !it->is_null()) {
        if (!it->is_string()) throw DataError(where + "parent_id must be a string or null");
        rec.parent_id = it->get<std::string>();
    }
    try {
        rec.role = parse_role(detail::require_string(row, "role", where));
    } catch (const DataError& e) {
        throw DataError(where + e.what());
    }
    rec.text = detail::require_string(row, "text", where);
    if (rec.text.empty()) throw DataError(where + "empty text");
    if (auto it = row.find("labels"); it != row.end() && !it->is_null()) {
        if (!it->is_object()) throw DataError(where + "labels must be an object");
        for (auto l = it->begin(); l != it->end(); ++l) {
            if (!l.value().is_number())
                throw DataError(where + "label '" + l.key() + "' is not a number");
            const double s = l.value().get<double>();
            if (!std::isfinite(s) || s < 0.0 || s > 1.0)
                throw DataError(where + "label '" + l.key() + "' score outside [0,1]");
            rec.labels[l.key()] = s;
        }
    }
    return rec;
}

// Validates a whole corpus: unique ids, resolvable parents, no cycles.
inline void validate_multilabel(const std::vector<MultiLabelRecord>& records) {
    std::unordered_map<std::string, std::size_t> index;
    index.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        if (!index.emplace(records[i].id, i).second)
            throw DataError("duplicate id '" + records[i].id + "'");
    for (const auto& r : records)
        if (r.parent_id && !index.contains(*r.parent_id))
            throw DataError("record '" + r.id + "' has dangling parent_id '" + *r.parent_id +
                            "'");
    detail::check_forest(records, index);
}

inline std::vector<MultiLabelRecord> parse_multilabel(std::istream& in,
                                                      const std::string& source,
                                                      ParseStats& stats) {
    std::vector<MultiLabelRecord> records;
    std::unordered_map<std::string, std::size_t> first_line;
    for_each_line(in, [&](std::size_t number, const std::string& line) {
        ++stats.lines;
        const auto where = detail::at_line(source, number);
        auto rec = parse_multilabel_row(parse_json_line(line, source, number), where, stats);
        if (!first_line.emplace(rec.id, number).second)
            throw DataError(where + "duplicate id '" + rec.id + "' (first seen on line " +
                            std::to_string(first_line[rec.id]) + ")");
        records.push_back(std::move(rec));
    });
    validate_multilabel(records);
    return records;
}

inline std::vector<MultiLabelRecord> parse_multilabel(const std::filesystem::path& path,
                                                      ParseStats& stats) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return parse_multilabel(in, path.string(), stats);
}

inline std::vector<MultiLabelRecord> parse_multilabel(const std::filesystem::path& path) {
    ParseStats stats;
    return parse_multilabel(path, stats);
}

inline ChoicePairRecord parse_choice_row(const Json& row, const std::string& where,
                                         std::string_view blank_marker, ParseStats& stats) {
    detail::count_unknown(row, {"id", "sentence", "option0", "option1", "answer_index"}, stats);
    ChoicePairRecord rec;
    rec.id = detail::require_string(row, "id", where);
    rec.sentence = detail::require_string(row, "sentence", where);
    rec.option0 = detail::require_string(row, "option0", where);
    rec.option1 = detail::require_string(row, "option1", where);
    const Json& answer = detail::require(row, "answer_index", where);
    if (!answer.is_number_integer())
        throw DataError(where + "answer_index must be 0 or 1");
    const auto idx = answer.get<long long>();
    if (idx != 0 && idx != 1) throw DataError(where + "answer_index must be 0 or 1");
    rec.answer_index = static_cast<int>(idx);

    const auto blanks = count_occurrences(rec.sentence, blank_marker);
    if (blanks == 0)
        throw DataError(where + "sentence has no blank marker '" + std::string(blank_marker) +
                        "'");
    if (blanks > 1)
        throw DataError(where + "sentence has " + std::to_string(blanks) +
                        " blank markers, expected exactly one");
    if (rec.option0 == rec.option1) throw DataError(where + "option0 equals option1");
    return rec;
}

inline std::vector<ChoicePairRecord> parse_choice(std::istream& in, const std::string& source,
                                                  ParseStats& stats,
                                                  std::string_view blank_marker =
                                                      default_blank_marker) {
    if (blank_marker.empty()) throw ConfigError("blank marker must not be empty");
    std::vector<ChoicePairRecord> records;
    std::unordered_map<std::string, std::size_t> first_line;
    for_each_line(in, [&](std::size_t number, const std::string& line) {
        ++stats.lines;
        const auto where = detail::at_line(source, number);
        auto rec = parse_choice_row(parse_json_line(line, source, number), where, blank_marker,
                                    stats);
        if (!first_line.emplace(rec.id, number).second)
            throw DataError(where + "duplicate id '" + rec.id + "'");
        records.push_back(std::move(rec));
    });
    return records;
}

inline std::vector<ChoicePairRecord> parse_choice(const std::filesystem::path& path,
                                                  ParseStats& stats,
                                                  std::string_view blank_marker =
                                                      default_blank_marker) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return parse_choice(in, path.string(), stats, blank_marker);
}

inline std::vector<ChoicePairRecord> parse_choice(const std::filesystem::path& path,
                                                  std::string_view blank_marker =
                                                      default_blank_marker) {
    ParseStats stats;
    return parse_choice(path, stats, blank_marker);
}

inline Json to_json(const MultiLabelRecord& r) {
    Json labels = Json::object();
    for (const auto& [name, score] : r.labels) labels[name] = score;
    return Json{{"id", r.id},
                {"parent_id", r.parent_id ? Json(*r.parent_id) : Json(nullptr)},
                {"role", to_string(r.role)},
                {"text", r.text},
                {"labels", std::move(labels)}};
}

inline Json to_json(const ChoicePairRecord& r) {
    return Json{{"id", r.id},
                {"sentence", r.sentence},
                {"option0", r.option0},
                {"option1", r.option1},
                {"answer_index", r.answer_index}};
}

template <class Record>
std::string serialize_jsonl(const std::vector<Record>& records) {
    std::string out;
    for (const auto& r : records) out += dump_line(to_json(r));
    return out;
}

// One group per record that has at least one child, ordered by the parent's
// position in the input; children keep input order. Roles are not consulted:
// every parent is a state and every child an action.
inline std::vector<PromptWithResponses> link_prompt_responses(
    const std::vector<MultiLabelRecord>& records) {
    std::unordered_map<std::string, std::size_t> position;
    position.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) position.emplace(records[i].id, i);

    std::vector<std::vector<std::size_t>> children(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        if (const auto& parent = records[i].parent_id)
            children.at(position.at(*parent)).push_back(i);

    std::vector<PromptWithResponses> groups;
    for (std::size_t p = 0; p < records.size(); ++p) {
        if (children[p].empty()) continue;
        PromptWithResponses g{records[p].id, records[p].text, {}};
        g.responses.reserve(children[p].size());
        for (auto c : children[p])
            g.responses.push_back({records[c].id, records[c].text, records[c].labels});
        groups.push_back(std::move(g));
    }
    return groups;
}

} // namespace hetfeed
