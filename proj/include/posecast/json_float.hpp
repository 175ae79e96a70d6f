#pragma once

#include <charconv>
#include <cstdlib>

namespace posecast {

// A float as the shortest decimal that reads back to the same float, so
// configs show 0.002 rather than 0.0020000000949949026.
inline double json_float(float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf - 1, v);
  *res.ptr = '\0';
  return std::strtod(buf, nullptr);
}

}  // namespace posecast
