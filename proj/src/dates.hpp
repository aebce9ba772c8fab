#pragma once

#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace drmatch {

struct Date {
  int y = 0;
  int m = 0;  // 1..12
  int d = 0;  // 1..31
  auto operator<=>(const Date&) const = default;
};

struct Month {
  int y = 0;
  int m = 0;
  auto operator<=>(const Month&) const = default;
};

inline Month month_of(const Date& d) { return {d.y, d.m}; }

inline Month prev_month(Month mo) {
  if (mo.m == 1) return {mo.y - 1, 12};
  return {mo.y, mo.m - 1};
}

inline bool in_month(const Date& d, Month mo) {
  return d.y == mo.y && d.m == mo.m;
}

// strict ISO "YYYY-MM-DD"
inline Date parse_date(std::string_view s, std::string_view context = "") {
  auto bad = [&]() -> Date {
    fail(Status::ParseError,
         "invalid date '" + std::string(s) + "'" +
             (context.empty() ? "" : " in " + std::string(context)));
  };
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') bad();
  for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
    if (s[i] < '0' || s[i] > '9') bad();
  auto num = [&](size_t pos, size_t len) {
    int v = 0;
    for (size_t i = pos; i < pos + len; ++i) v = v * 10 + (s[i] - '0');
    return v;
  };
  Date d{num(0, 4), num(5, 2), num(8, 2)};
  if (d.m < 1 || d.m > 12 || d.d < 1 || d.d > 31) bad();
  return d;
}

inline std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.y, d.m, d.d);
  return buf;
}

}  // namespace drmatch
