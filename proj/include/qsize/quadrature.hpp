#pragma once

#include <functional>
#include <vector>

namespace qsize {

struct QuadOptions {
  double abs_tol = 1e-10;
  double rel_tol = 0.0;
  int max_subdivisions = 4000;
};

/// Adaptive Gauss-Legendre integration of f over [a, b].
/// Each panel is estimated with a 15-point rule and accepted once the
/// two-half refinement agrees with it to within the panel's share of the
/// tolerance. Interior breakpoints (discontinuities of f or its derivatives)
/// start the subdivision so that no panel straddles them.
/// Throws Error("QuadratureFailure") when the subdivision budget runs out.
double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadOptions& opts = {},
                 const std::vector<double>& breakpoints = {});

/// Integral over [a, inf) by the substitution t = a + s/(1-s).
double integrate_to_infinity(const std::function<double(double)>& f, double a,
                             const QuadOptions& opts = {});

}  // namespace qsize
