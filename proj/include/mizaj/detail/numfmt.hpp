#pragma once

#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>
#include <system_error>

#include "mizaj/error.hpp"

namespace mizaj::detail {

// Shortest decimal form that parses back to the same double.
inline void append_double(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, end);
}

inline std::string format_double(double v) {
  std::string s;
  append_double(s, v);
  return s;
}

inline void append_fixed(std::string& out, double v, int decimals) {
  char buf[64];
  int n = std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  out.append(buf, static_cast<std::size_t>(n));
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(Errc::ParseError, "not a number: '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace mizaj::detail
