#pragma once

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hsps::detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

// Splits on any run of whitespace and/or the given extra separators.
inline std::vector<std::string> split_fields(std::string_view s, std::string_view extra = "") {
    std::vector<std::string> out;
    std::string current;
    auto is_sep = [&](char c) {
        return c == ' ' || c == '\t' || c == '\r' || c == '\n' ||
               extra.find(c) != std::string_view::npos;
    };
    for (char c : s) {
        if (is_sep(c)) {
            if (!current.empty()) out.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    double value = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return value;
}

inline std::optional<long long> parse_int(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    long long value = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec == std::errc{} && ptr == end) return value;
    // Accept integral values written in floating notation, e.g. 1e8.
    if (auto d = parse_double(s); d && *d == static_cast<double>(static_cast<long long>(*d)))
        return static_cast<long long>(*d);
    return std::nullopt;
}

// Strips a trailing `#` comment.
inline std::string_view strip_comment(std::string_view line) {
    const auto pos = line.find('#');
    return pos == std::string_view::npos ? line : line.substr(0, pos);
}

}  // namespace hsps::detail
