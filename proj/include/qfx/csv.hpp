#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qfx {

std::string_view trim(std::string_view text);

// Splits on commas. Quoted fields are not supported; none of the files this
// library reads or writes need them.
std::vector<std::string_view> split_csv_line(std::string_view line);

// Strict full-field parse; nullopt on trailing garbage or empty input.
std::optional<double> parse_double(std::string_view text);

// Shortest representation that parses back to the same double.
std::string format_double(double value);

}  // namespace qfx
