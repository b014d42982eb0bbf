#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace iadcps::csv {

/// Shortest decimal text that parses back to the same double.
std::string format(double value);

std::vector<std::string_view> split(std::string_view line, char sep = ',');

/// Strict full-field parse; returns false on any trailing garbage.
bool parse(std::string_view field, double& out);
bool parse(std::string_view field, long long& out);

}  // namespace iadcps::csv
