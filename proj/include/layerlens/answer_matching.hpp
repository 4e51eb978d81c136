#pragma once

#include <cctype>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace layerlens {

// Contents of the LAST "\boxed{...}" in the text, with balanced-brace
// matching (nested braces preserved). Empty optional when no "\boxed{"
// exists or the last occurrence never closes.
inline std::optional<std::string> extract_boxed_answer(const std::string& text) {
    const std::string marker = "\\boxed{";
    const std::size_t at = text.rfind(marker);
    if (at == std::string::npos) return std::nullopt;
    const std::size_t start = at + marker.size();
    int depth = 1;
    for (std::size_t i = start; i < text.size(); ++i) {
        if (text[i] == '{') {
            ++depth;
        } else if (text[i] == '}') {
            if (--depth == 0) return text.substr(start, i - start);
        }
    }
    return std::nullopt;
}

namespace detail {

inline void erase_all(std::string& s, const std::string& needle) {
    for (std::size_t pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos)) {
        s.erase(pos, needle.size());
    }
}

// Replaces every \text{...} / \mathrm{...} wrapper with its contents
// (balanced braces); unterminated wrappers are left alone.
inline void unwrap_command(std::string& s, const std::string& command) {
    const std::string marker = command + "{";
    std::size_t pos = 0;
    while ((pos = s.find(marker, pos)) != std::string::npos) {
        const std::size_t start = pos + marker.size();
        int depth = 1;
        std::size_t end = std::string::npos;
        for (std::size_t i = start; i < s.size(); ++i) {
            if (s[i] == '{') {
                ++depth;
            } else if (s[i] == '}' && --depth == 0) {
                end = i;
                break;
            }
        }
        if (end == std::string::npos) return;
        s = s.substr(0, pos) + s.substr(start, end - start) + s.substr(end + 1);
    }
}

inline std::string ascii_lower(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = char(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// The normalization pipeline behind math_answers_equal, applied in order:
//   1. drop '$' math delimiters
//   2. drop spacing/sizing commands: \left \right \! \, \;
//   3. unwrap \text{...} and \mathrm{...}
//   4. drop degree markers ^{\circ} and ^\circ
//   5. drop all whitespace
//   6. drop commas used as digit separators (digit on both sides)
inline std::string normalize_math(const std::string& raw) {
    std::string s = raw;
    erase_all(s, "$");
    erase_all(s, "\\left");
    erase_all(s, "\\right");
    erase_all(s, "\\!");
    erase_all(s, "\\,");
    erase_all(s, "\\;");
    unwrap_command(s, "\\text");
    unwrap_command(s, "\\mathrm");
    erase_all(s, "^{\\circ}");
    erase_all(s, "^\\circ");
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const unsigned char c = static_cast<unsigned char>(s[i]);
        if (std::isspace(c)) continue;
        if (s[i] == ',' && !out.empty() &&
            std::isdigit(static_cast<unsigned char>(out.back())) && i + 1 < s.size() &&
            std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
            continue;
        }
        out.push_back(s[i]);
    }
    return out;
}

struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;  // > 0
};

// Signed integer or decimal literal -> exact rational. Rejects anything with
// more than 18 digits so later cross-multiplication cannot overflow.
inline std::optional<Rational> parse_decimal(const std::string& s) {
    std::size_t i = 0;
    std::int64_t sign = 1;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
        if (s[i] == '-') sign = -1;
        ++i;
    }
    std::int64_t num = 0;
    std::int64_t den = 1;
    std::size_t digits = 0;
    bool seen_dot = false;
    for (; i < s.size(); ++i) {
        if (s[i] == '.') {
            if (seen_dot) return std::nullopt;
            seen_dot = true;
            continue;
        }
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
        if (++digits > 18) return std::nullopt;
        num = num * 10 + (s[i] - '0');
        if (seen_dot) den *= 10;
    }
    if (digits == 0) return std::nullopt;
    const std::int64_t g = std::gcd(num, den);
    return Rational{sign * num / g, den / g};
}

// Grabs one balanced {...} group starting at s[pos]; advances pos past it.
inline std::optional<std::string> take_brace_group(const std::string& s, std::size_t& pos) {
    if (pos >= s.size() || s[pos] != '{') return std::nullopt;
    int depth = 1;
    for (std::size_t i = pos + 1; i < s.size(); ++i) {
        if (s[i] == '{') {
            ++depth;
        } else if (s[i] == '}' && --depth == 0) {
            std::string group = s.substr(pos + 1, i - pos - 1);
            pos = i + 1;
            return group;
        }
    }
    return std::nullopt;
}

// Normalized string -> exact rational, accepting decimals, \frac{p}{q}
// (plus \dfrac/\tfrac), and plain p/q.
inline std::optional<Rational> parse_rational(const std::string& s) {
    std::int64_t sign = 1;
    std::size_t i = 0;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
        if (s[i] == '-') sign = -1;
        ++i;
    }
    const std::string rest = s.substr(i);

    for (const std::string frac : {"\\frac", "\\dfrac", "\\tfrac"}) {
        if (rest.rfind(frac, 0) != 0) continue;
        std::size_t pos = frac.size();
        const auto p = take_brace_group(rest, pos);
        const auto q = p ? take_brace_group(rest, pos) : std::nullopt;
        if (!q || pos != rest.size()) return std::nullopt;
        const auto pr = parse_decimal(*p);
        const auto qr = parse_decimal(*q);
        if (!pr || !qr || qr->num == 0) return std::nullopt;
        __int128 num = __int128(pr->num) * qr->den;
        __int128 den = __int128(pr->den) * qr->num;
        if (den < 0) {
            num = -num;
            den = -den;
        }
        if (num > INT64_MAX || num < INT64_MIN || den > INT64_MAX) return std::nullopt;
        const std::int64_t g = std::gcd(std::int64_t(num < 0 ? -num : num), std::int64_t(den));
        return Rational{sign * std::int64_t(num) / (g ? g : 1),
                        std::int64_t(den) / (g ? g : 1)};
    }

    const std::size_t slash = rest.find('/');
    if (slash != std::string::npos && rest.find('/', slash + 1) == std::string::npos) {
        const auto pr = parse_decimal(rest.substr(0, slash));
        const auto qr = parse_decimal(rest.substr(slash + 1));
        if (!pr || !qr || qr->num == 0) return std::nullopt;
        __int128 num = __int128(pr->num) * qr->den;
        __int128 den = __int128(pr->den) * qr->num;
        if (den < 0) {
            num = -num;
            den = -den;
        }
        if (num > INT64_MAX || num < INT64_MIN || den > INT64_MAX) return std::nullopt;
        const std::int64_t g = std::gcd(std::int64_t(num < 0 ? -num : num), std::int64_t(den));
        return Rational{sign * std::int64_t(num) / (g ? g : 1),
                        std::int64_t(den) / (g ? g : 1)};
    }

    auto r = parse_decimal(rest);
    if (!r) return std::nullopt;
    r->num *= sign;
    return r;
}

}  // namespace detail

// Math answers are equal when both normalize to the same exact rational
// value, or — if either fails to parse as a number — when the normalized
// strings match ASCII-case-insensitively.
inline bool math_answers_equal(const std::string& a, const std::string& b) {
    const std::string na = detail::normalize_math(a);
    const std::string nb = detail::normalize_math(b);
    const auto ra = detail::parse_rational(na);
    const auto rb = detail::parse_rational(nb);
    if (ra && rb) {
        return __int128(ra->num) * rb->den == __int128(rb->num) * ra->den;
    }
    return detail::ascii_lower(na) == detail::ascii_lower(nb);
}

// True when any alias, lowercased, occurs verbatim inside the lowercased
// response. An empty alias list never matches.
inline bool substring_match(const std::string& response, const std::vector<std::string>& aliases) {
    const std::string haystack = detail::ascii_lower(response);
    for (const std::string& alias : aliases) {
        if (haystack.find(detail::ascii_lower(alias)) != std::string::npos) return true;
    }
    return false;
}

}  // namespace layerlens
