#pragma once

#include <cmath>
#include <string>

#include "mflow/errors.hpp"

namespace mflow {

inline constexpr int kBisectMaxIter = 100;

/// Solves f(x) = y for increasing f on [lo, hi]. Runs until the bracket stops
/// shrinking in floating point or the iteration cap is hit. Values outside
/// [f(lo), f(hi)] by more than `slack` are reported as NoBracket.
template <class F>
double bisect_increasing(F&& f, double y, double lo, double hi, double slack = 1e-9) {
  const double flo = f(lo);
  const double fhi = f(hi);
  if (!(y >= flo - slack && y <= fhi + slack)) {
    throw InvError(InvError::Kind::NoBracket, "bisection: target " + std::to_string(y) + " outside [" +
                                                  std::to_string(flo) + ", " + std::to_string(fhi) + "]");
  }
  if (y <= flo) return lo;
  if (y >= fhi) return hi;
  double f_lo = flo;
  double f_hi = fhi;
  for (int it = 0; it < kBisectMaxIter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm < y) {
      lo = mid;
      f_lo = fm;
    } else {
      hi = mid;
      f_hi = fm;
    }
  }
  return y - f_lo < f_hi - y ? lo : hi;
}

}  // namespace mflow
