#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fedshield {

/// Formats a double with enough digits for an exact value round trip.
inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == delim) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

/// Strict full-token parse; rejects trailing garbage, NaN and infinities.
inline std::optional<double> parse_double_strict(const std::string& token) {
    if (token.empty()) return std::nullopt;
    const char* begin = token.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + token.size()) return std::nullopt;
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

/// Strict decimal integer parse (optional leading '-' or '+').
inline std::optional<long long> parse_int_strict(const std::string& token) {
    if (token.empty()) return std::nullopt;
    std::size_t i = (token[0] == '-' || token[0] == '+') ? 1 : 0;
    if (i == token.size()) return std::nullopt;
    for (std::size_t k = i; k < token.size(); ++k)
        if (!std::isdigit(static_cast<unsigned char>(token[k]))) return std::nullopt;
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(token.c_str(), &end, 10);
    if (errno == ERANGE || end != token.c_str() + token.size()) return std::nullopt;
    return v;
}

inline std::optional<unsigned long long> parse_u64_strict(const std::string& token) {
    if (token.empty() || token[0] == '-') return std::nullopt;
    std::size_t i = (token[0] == '+') ? 1 : 0;
    if (i == token.size()) return std::nullopt;
    for (std::size_t k = i; k < token.size(); ++k)
        if (!std::isdigit(static_cast<unsigned char>(token[k]))) return std::nullopt;
    errno = 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(token.c_str(), &end, 10);
    if (errno == ERANGE || end != token.c_str() + token.size()) return std::nullopt;
    return v;
}

}  // namespace fedshield
