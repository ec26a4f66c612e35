// num_format.hpp — locale-free, shortest round-trip number formatting and strict parsing.
#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>

#include "error.hpp"

namespace ctrl {

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  require(ec == std::errc(), errc::internal, "format_double: to_chars failed");
  return std::string(buf, ptr);
}

inline bool try_parse_double(std::string_view s, double& out) {
  // from_chars rejects leading whitespace and leading '+'; trim and accept '+' ourselves.
  size_t b = s.find_first_not_of(" \t\r");
  size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string_view::npos) return false;
  s = s.substr(b, e - b + 1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::string format_int(int64_t v) { return std::to_string(v); }

}  // namespace ctrl
