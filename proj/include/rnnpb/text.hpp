#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "rnnpb/types.hpp"

namespace rnnpb::text {

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delimiter);

/// Strict parse: the whole token must be a finite or infinite decimal number.
bool parse_double(std::string_view s, double& out);
bool parse_size(std::string_view s, std::size_t& out);

/// Shortest decimal text that reads back to exactly the same double.
std::string format_double(double v);
std::string join(const Vector& v, char delimiter = ',');
Vector parse_vector(std::string_view s, char delimiter = ',');

}  // namespace rnnpb::text
