#pragma once

#include <cstdio>
#include <string>

namespace sparseweak {

/// Reals are always written with 17 significant digits so they round-trip.
inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace sparseweak
