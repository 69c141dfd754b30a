#pragma once

#include <cmath>

#include "afl/error.hpp"

namespace afl {

struct BisectResult {
  double x = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

/// Root of a nondecreasing `f` on [lo, hi] with f(lo) <= 0 <= f(hi).
///
/// Stops once |f(x)| <= tol, or when the bracket has shrunk to adjacent
/// doubles, in which case the endpoint with the smaller residual is returned.
template <class F>
BisectResult bisect_increasing(F&& f, double lo, double hi, double tol,
                               int max_iter = 200) {
  double f_lo = f(lo);
  if (std::abs(f_lo) <= tol) return {lo, f_lo, 0};
  double f_hi = f(hi);
  if (std::abs(f_hi) <= tol) return {hi, f_hi, 0};
  if (!(f_lo < 0.0 && f_hi > 0.0)) {
    throw InvalidArgument("bisection: root is not bracketed");
  }
  for (int it = 1; it <= max_iter; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    const double f_mid = f(mid);
    if (std::abs(f_mid) <= tol) return {mid, f_mid, it};
    if (f_mid < 0.0) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
      f_hi = f_mid;
    }
  }
  if (std::abs(f_lo) <= std::abs(f_hi)) return {lo, f_lo, max_iter};
  return {hi, f_hi, max_iter};
}

}  // namespace afl
