#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ringlaw {

struct RootOptions {
  double f_tol = 1e-12;        // stop when |f| drops below this
  double x_tol_rel = 1e-15;    // or when the bracket shrinks to this relative width
  int max_iter = 200;
};

/// Bisection on a bracketing interval [lo, hi] with f(lo) and f(hi) of
/// opposite sign, followed by Newton polish when a derivative is supplied.
/// The polished iterate is rejected if it leaves the bracket.
template <typename F, typename DF>
double solve_bracketed(F&& f, DF&& df, double lo, double hi,
                       const RootOptions& opt = {}) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  if ((flo > 0) == (fhi > 0)) {
    std::ostringstream msg;
    msg << "solve_bracketed: root not bracketed, f(" << lo << ")=" << flo
        << ", f(" << hi << ")=" << fhi;
    throw std::runtime_error(msg.str());
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < opt.max_iter; ++it) {
    x = 0.5 * (lo + hi);
    double fx = f(x);
    if (std::abs(fx) <= opt.f_tol) break;
    if ((fx > 0) == (flo > 0)) {
      lo = x;
      flo = fx;
    } else {
      hi = x;
    }
    if (hi - lo <= opt.x_tol_rel * (std::abs(lo) + std::abs(hi) + 1e-300)) break;
  }
  // Newton refinement inside the final bracket.
  for (int it = 0; it < 8; ++it) {
    double fx = f(x);
    if (fx == 0) return x;
    double d = df(x);
    if (d == 0) break;
    double xn = x - fx / d;
    if (!(xn > lo && xn < hi)) break;
    if (xn == x) break;
    x = xn;
  }
  return x;
}

/// Scan [lo, hi] with `segments` equal pieces and report how many sign
/// changes f has; the first bracketing piece is returned through lo/hi.
template <typename F>
int count_sign_changes(F&& f, double& lo, double& hi, int segments) {
  const double a = lo, b = hi;
  int changes = 0;
  double x_prev = a;
  double f_prev = f(a);
  for (int k = 1; k <= segments; ++k) {
    const double x = a + (b - a) * k / segments;
    const double fx = f(x);
    if ((fx > 0) != (f_prev > 0)) {
      if (changes == 0) {
        lo = x_prev;
        hi = x;
      }
      ++changes;
    }
    x_prev = x;
    f_prev = fx;
  }
  return changes;
}

}  // namespace ringlaw
