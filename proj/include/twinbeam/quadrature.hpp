#ifndef TWINBEAM_QUADRATURE_HPP
#define TWINBEAM_QUADRATURE_HPP

#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "twinbeam/core.hpp"

namespace twinbeam {

/// Result of a refinement ladder: the value at the finest level plus the
/// relative change of the final doubling (the convergence certificate).
struct Convergence {
  double value = 0;
  double rel_change = 0;
  int levels = 0;
  bool converged = false;
  std::vector<double> trace;
};

/// Evaluate eval(level) for level = 0, 1, ... doubling the resolution each
/// time, until the relative change drops below rel_tol. Throws on
/// non-convergence unless allow_fail.
template <typename F>
Convergence refine_until(F&& eval, double rel_tol, int max_levels, bool allow_fail = false) {
  Convergence c;
  double prev = 0;
  for (int lvl = 0; lvl < max_levels; ++lvl) {
    double v = eval(lvl);
    c.trace.push_back(v);
    c.levels = lvl + 1;
    if (lvl > 0) {
      double scale = std::max({std::abs(v), std::abs(prev), 1e-300});
      c.rel_change = std::abs(v - prev) / scale;
      if (c.rel_change <= rel_tol) {
        c.value = v;
        c.converged = true;
        return c;
      }
    }
    prev = v;
  }
  c.value = prev;
  if (!allow_fail) {
    std::ostringstream os;
    os << "quadrature did not converge: relative change " << c.rel_change << " after " << c.levels
       << " refinements (trace:";
    for (double t : c.trace) os << " " << t;
    os << ")";
    throw NumericalError(os.str());
  }
  return c;
}

/// Trapezoid weights on a closed uniform grid of n points.
inline double trapezoid_weight(int i, int n) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; }

/// Trapezoid rule for f over [a, b] with n points (n >= 2).
template <typename F>
double trapezoid(F&& f, double a, double b, int n) {
  const double h = (b - a) / (n - 1);
  double s = 0;
  for (int i = 0; i < n; ++i) s += trapezoid_weight(i, n) * f(a + i * h);
  return s * h;
}

}  // namespace twinbeam

#endif  // TWINBEAM_QUADRATURE_HPP
