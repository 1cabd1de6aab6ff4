#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace fleetcm {

using Timestamp = std::chrono::sys_seconds;

// SCADA records are 10-minute aggregates.
inline constexpr std::chrono::seconds kDefaultCadence{600};

// Accepts "YYYY-MM-DDTHH:MM[:SS]" with 'T' or ' ' as separator and an optional
// trailing "Z" or "+00:00". Throws DataError on anything else.
Timestamp parse_timestamp(std::string_view text);

// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_timestamp(Timestamp t);

inline double hours_between(Timestamp from, Timestamp to) {
  return std::chrono::duration<double, std::ratio<3600>>(to - from).count();
}

}  // namespace fleetcm
