#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace straptor::text {

bool is_valid_utf8(std::string_view s) noexcept;

// Strips a leading UTF-8 byte-order mark, if any.
std::string_view strip_bom(std::string_view s) noexcept;

std::string_view trim(std::string_view s) noexcept;
std::string to_lower(std::string_view s);  // ASCII only
std::string collapse_whitespace(std::string_view s);
bool iequals(std::string_view a, std::string_view b) noexcept;
bool icontains(std::string_view haystack, std::string_view needle);

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Lowercase, runs of non-alphanumerics collapsed to '-', trimmed of '-'.
std::string slug(std::string_view s);

std::uint64_t fnv1a64(std::string_view s) noexcept;
std::string hex64(std::uint64_t v);

// Shortest decimal string that round-trips to the same double.
std::string shortest_decimal(double v);

// Human-facing rendering: at most 12 significant digits, no trailing zeros.
std::string display_number(double v);

std::string file_stem(std::string_view path);
std::string file_extension_lower(std::string_view path);  // includes the dot

}  // namespace straptor::text
