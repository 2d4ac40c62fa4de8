// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

namespace isoperi {

struct QuadratureRule {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;

  double apply(const std::function<double(double)>& f) const;
};

/// Gauss-Hermite rule for the N(0,1) density (weights sum to 1), by
/// Golub-Welsch on the probabilists' Hermite recurrence. 1 <= order <= 500.
QuadratureRule gauss_hermite(int order);

/// Gauss rule for phi(x) restricted to [0, inf) (weights sum to 1/2). The
/// recurrence is not known in closed form; it is recovered by a discretized
/// Stieltjes procedure on a composite Gauss-Legendre grid. 1 <= order <= 320.
QuadratureRule half_range_hermite(int order);

/// Gauss-Laguerre rule for e^{-u} on [0, inf). 1 <= order <= 500.
QuadratureRule gauss_laguerre(int order);

/// Gauss-Legendre rule on [-1, 1].
QuadratureRule gauss_legendre(int order);

/// Process-wide immutable caches; the returned references stay valid.
const QuadratureRule& cached_gauss_hermite(int order);
const QuadratureRule& cached_half_range_hermite(int order);
const QuadratureRule& cached_gauss_laguerre(int order);

struct ExpectationOptions {
  int order = 120;
  double rel_tol = 1e-9;
};

/// E f(T) for T ~ N(0, sd^2). Evaluated at two resolutions (order m and 2m,
/// or panel width h and h/2 when sd is large and Hermite nodes would be too
/// coarse against unit-scale features of f); disagreement beyond rel_tol
/// relative to E|f| raises NumericalError naming `what`. sd = 0 is a point
/// mass.
double expect_normal(const std::function<double(double)>& f, double sd,
                     const ExpectationOptions& opt, const std::string& what);

/// H(a) = int_0^inf e^{a x} phi(x) dx, returned as log H(a).
double log_half_line_tilt(double a, const ExpectationOptions& opt);

}  // namespace isoperi
