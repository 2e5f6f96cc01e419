#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lift {

std::string_view trim(std::string_view s);

/// Strict decimal parse: optional sign, digits, optional fraction and
/// exponent; surrounding whitespace allowed; the whole token must be
/// consumed. Non-finite results are rejected.
std::optional<double> parse_double(std::string_view s);

/// Fixed `decimals` digits, trailing zeros and a dangling point removed,
/// "-0" normalized to "0".
std::string format_number(double value, int decimals);

std::vector<std::string_view> split_whitespace(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace lift
