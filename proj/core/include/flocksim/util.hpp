#pragma once

#include <charconv>
#include <stdexcept>
#include <string>
#include <string_view>

namespace flocksim {

// Shortest round-trip decimal form. Used everywhere a double becomes text
// (CSV, canonical JSON) so that equal runs produce byte-equal files.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::invalid_argument("malformed number: " + std::string(s));
  return v;
}

}  // namespace flocksim
