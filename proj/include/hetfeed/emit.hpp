#pragma once

// Training-file writers. SFT rows keep only the preferred side of a pair;
// preference rows carry both sides for reward-model training.
//
// SFT row schema:
//   multilabel: {"prompt": <raw prompt>, "chosen": "Prompt: ...\n\nResponse: ..."}
//   choice:     {"prompt": <sentence filled with the correct option>}

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "hetfeed/io.hpp"
#include "hetfeed/render.hpp"
#include "hetfeed/unify.hpp"

namespace hetfeed {

inline Json sft_row(const PreferencePair& p) {
    if (p.source == Source::choice) return Json{{"prompt", p.chosen}};
    return Json{{"prompt", p.prompt}, {"chosen", render_prompt_response(p.prompt, p.chosen)}};
}

inline Json preference_row(const PreferencePair& p) {
    return Json{{"prompt", p.prompt},
                {"chosen", p.chosen},
                {"rejected", p.rejected},
                {"margin", p.margin},
                {"source", to_string(p.source)},
                {"axis", p.axis ? Json(*p.axis) : Json(nullptr)}};
}

inline std::string render_sft(const std::vector<PreferencePair>& pairs) {
    std::string out;
    for (const auto& p : pairs) out += dump_line(sft_row(p));
    return out;
}

inline std::string render_preference(const std::vector<PreferencePair>& pairs) {
    std::string out;
    for (const auto& p : pairs) out += dump_line(preference_row(p));
    return out;
}

inline std::size_t emit_sft(const std::vector<PreferencePair>& pairs,
                            const std::filesystem::path& out) {
    write_file(out, render_sft(pairs));
    return pairs.size();
}

inline std::size_t emit_preference(const std::vector<PreferencePair>& pairs,
                                   const std::filesystem::path& out) {
    write_file(out, render_preference(pairs));
    return pairs.size();
}

template <class Record>
std::size_t emit_unified(const std::vector<Record>& records, const std::filesystem::path& out) {
    std::string text;
    for (const auto& r : records) text += dump_line(to_json(r));
    write_file(out, text);
    return records.size();
}

} // namespace hetfeed
