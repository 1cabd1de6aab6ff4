#include "fleetcm/time.hpp"

#include <charconv>
#include <cstdio>

#include "fleetcm/errors.hpp"

namespace fleetcm {

namespace {

int read_int(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole) {
  int v = 0;
  if (pos + len > text.size()) {
    throw DataError("time", "truncated timestamp '" + std::string(whole) + "'");
  }
  const char* first = text.data() + pos;
  const auto res = std::from_chars(first, first + len, v);
  if (res.ec != std::errc() || res.ptr != first + len) {
    throw DataError("time", "bad timestamp '" + std::string(whole) + "'");
  }
  return v;
}

void expect(std::string_view text, std::size_t pos, std::string_view chars, std::string_view whole) {
  if (pos >= text.size() || chars.find(text[pos]) == std::string_view::npos) {
    throw DataError("time", "bad timestamp '" + std::string(whole) + "'");
  }
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  const std::string_view whole = text;
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  if (text.ends_with("Z")) {
    text.remove_suffix(1);
  } else if (text.ends_with("+00:00")) {
    text.remove_suffix(6);
  }
  const int year = read_int(text, 0, 4, whole);
  expect(text, 4, "-", whole);
  const int month = read_int(text, 5, 2, whole);
  expect(text, 7, "-", whole);
  const int day = read_int(text, 8, 2, whole);
  int hour = 0, minute = 0, second = 0;
  if (text.size() > 10) {
    expect(text, 10, "T ", whole);
    hour = read_int(text, 11, 2, whole);
    expect(text, 13, ":", whole);
    minute = read_int(text, 14, 2, whole);
    if (text.size() > 16) {
      expect(text, 16, ":", whole);
      second = read_int(text, 17, 2, whole);
      if (text.size() != 19) {
        throw DataError("time", "bad timestamp '" + std::string(whole) + "'");
      }
    }
  }
  const std::chrono::year_month_day ymd{std::chrono::year{year},
                                        std::chrono::month{static_cast<unsigned>(month)},
                                        std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) {
    throw DataError("time", "invalid date '" + std::string(whole) + "'");
  }
  return std::chrono::sys_days{ymd} + std::chrono::hours{hour} + std::chrono::minutes{minute} +
         std::chrono::seconds{second};
}

std::string format_timestamp(Timestamp t) {
  const auto days = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::year_month_day ymd{days};
  const std::chrono::hh_mm_ss hms{t - days};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

}  // namespace fleetcm
