#pragma once

#include <string>
#include <string_view>

#include "hetfeed/corpus.hpp"
#include "hetfeed/error.hpp"

namespace hetfeed {

// Fills the single blank of a fill-in-the-blank sentence.
inline std::string render_choice(std::string_view sentence, std::string_view option,
                                 std::string_view blank_marker = default_blank_marker) {
    const auto n = count_occurrences(sentence, blank_marker);
    if (n != 1)
        throw DataError("expected exactly one blank marker '" + std::string(blank_marker) +
                        "' in sentence, found " + std::to_string(n));
    const auto pos = sentence.find(blank_marker);
    std::string out;
    out.reserve(sentence.size() - blank_marker.size() + option.size());
    out.append(sentence.substr(0, pos));
    out.append(option);
    out.append(sentence.substr(pos + blank_marker.size()));
    return out;
}

// Conversation template; the two newlines are literal line feeds.
inline std::string render_prompt_response(std::string_view prompt, std::string_view response) {
    std::string out;
    out.reserve(prompt.size() + response.size() + 20);
    out.append("Prompt: ").append(prompt).append("\n\n").append("Response: ").append(response);
    return out;
}

} // namespace hetfeed
