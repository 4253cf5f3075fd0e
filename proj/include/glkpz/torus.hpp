#pragma once

#include <cstddef>

namespace glkpz {

// x mod n in [0, n)
inline std::size_t wrap_index(long x, std::size_t n) {
  long r = x % static_cast<long>(n);
  if (r < 0) r += static_cast<long>(n);
  return static_cast<std::size_t>(r);
}

}  // namespace glkpz
