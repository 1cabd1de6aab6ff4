#pragma once

// Minimal RFC-4180 style reader/writer: comma separated, optional double
// quotes with "" escapes, no embedded newlines.

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fleetcm::csv {

std::vector<std::string> split_line(std::string_view line);

std::string escape(std::string_view field);

// Reads the next non-empty line; strips a trailing '\r'.
bool next_line(std::istream& in, std::string& line);

// Parses a floating-point field. Empty, "nan", "NaN", "NA" and "null" are
// missing values and yield std::nullopt; garbage throws DataError.
std::optional<double> parse_number(std::string_view field);

// Shortest representation that round-trips.
std::string format_number(double v);

}  // namespace fleetcm::csv
