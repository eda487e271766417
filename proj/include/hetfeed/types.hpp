#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>

#include "hetfeed/error.hpp"

namespace hetfeed {

inline constexpr std::string_view version = "0.1.0";

// Which kind of human feedback a unified record came from.
enum class Source { multilabel, choice };

enum class Role { prompter, assistant };

// Direction of a label axis: toxicity is lower_is_positive, quality higher_is_positive.
enum class Polarity { higher_is_positive, lower_is_positive };

enum class Reward : int { negative = -1, positive = 1 };

inline std::string_view to_string(Source s) {
    return s == Source::multilabel ? "multilabel" : "choice";
}

inline Source parse_source(std::string_view s) {
    if (s == "multilabel") return Source::multilabel;
    if (s == "choice") return Source::choice;
    throw DataError("unknown source '" + std::string(s) + "'");
}

inline std::string_view to_string(Role r) {
    return r == Role::prompter ? "prompter" : "assistant";
}

inline Role parse_role(std::string_view s) {
    if (s == "prompter") return Role::prompter;
    if (s == "assistant") return Role::assistant;
    throw DataError("unknown role '" + std::string(s) + "'");
}

inline std::string_view to_string(Polarity p) {
    return p == Polarity::higher_is_positive ? "higher_is_positive" : "lower_is_positive";
}

inline Polarity parse_polarity(std::string_view s) {
    if (s == "higher_is_positive") return Polarity::higher_is_positive;
    if (s == "lower_is_positive") return Polarity::lower_is_positive;
    throw ConfigError("unknown polarity '" + std::string(s) + "'");
}

inline Polarity flipped(Polarity p) {
    return p == Polarity::higher_is_positive ? Polarity::lower_is_positive
                                             : Polarity::higher_is_positive;
}

inline Reward negate(Reward r) {
    return r == Reward::positive ? Reward::negative : Reward::positive;
}

inline int to_int(Reward r) { return static_cast<int>(r); }

// ceil(fraction * n) for fraction in (0,1]. Products that land within
// rounding noise of an integer (0.6 * 5 == 3.0000000000000004) snap to it.
inline std::size_t ceil_fraction(double fraction, std::size_t n) {
    const double exact = fraction * static_cast<double>(n);
    const double nearest = std::round(exact);
    if (std::abs(exact - nearest) <= 1e-9 * std::max(1.0, nearest))
        return static_cast<std::size_t>(nearest);
    return std::min(n, static_cast<std::size_t>(std::ceil(exact)));
}

} // namespace hetfeed
