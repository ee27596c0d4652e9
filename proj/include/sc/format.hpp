#pragma once

#include <charconv>
#include <string>

namespace sc {

// Shortest decimal text that reads back to the same double.
inline std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace sc
