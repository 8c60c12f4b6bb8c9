#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace msbp {

// A point z = (x, y) of D = [0, inf) x N.
struct State {
  double x = 0.0;
  std::int64_t y = 0;

  friend bool operator==(const State&, const State&) = default;
};

// Sentinel cell count after explosion.
inline constexpr std::int64_t kExplodedY = std::numeric_limits<std::int64_t>::max();

// Exponent pair for the test functions e_lambda(z) = exp(-l1 x - l2 y).
struct Lambda {
  double l1 = 0.0;
  double l2 = 0.0;
};

inline double e_lambda(const State& z, const Lambda& lam) noexcept {
  return std::exp(-lam.l1 * z.x - lam.l2 * static_cast<double>(z.y));
}

}  // namespace msbp
