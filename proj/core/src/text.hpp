#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pscv::text {

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

/// Fixed-point with `decimals` digits.
std::string format_fixed(double v, int decimals);

/// Whole-token parses; return false on trailing garbage or overflow.
bool parse_double(std::string_view s, double& out);
bool parse_int64(std::string_view s, std::int64_t& out);
bool parse_int(std::string_view s, int& out);

/// Splits on runs of spaces and tabs.
std::vector<std::string_view> split_ws(std::string_view line);

std::vector<std::string_view> split(std::string_view s, char sep);

std::string_view trim(std::string_view s);

}  // namespace pscv::text
