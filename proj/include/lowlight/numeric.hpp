#pragma once

#include <cmath>
#include <cstddef>

namespace lowlight {

/// ceil(fraction * n), tolerant of products that land within rounding noise
/// of an integer (457.0 / 577 * 577 must give 457, not 458).
inline std::size_t ceil_count(double fraction, std::size_t n) {
  const double x = fraction * static_cast<double>(n);
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-9 * (1.0 + std::abs(x))) return static_cast<std::size_t>(nearest);
  return static_cast<std::size_t>(std::ceil(x));
}

}  // namespace lowlight
