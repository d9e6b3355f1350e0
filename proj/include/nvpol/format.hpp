#pragma once

#include <string>
#include <string_view>

namespace nvpol {

// Shortest representation that parses back to the same double.
std::string format_double(double x);

// Strict parse of a whole token; throws std::invalid_argument.
double parse_double(std::string_view token);

}  // namespace nvpol
