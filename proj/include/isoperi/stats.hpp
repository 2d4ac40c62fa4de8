// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

namespace isoperi {

double mean(const std::vector<double>& x);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double sample_sd(const std::vector<double>& x);
/// Standard error of the mean.
double standard_error(const std::vector<double>& x);

/// P(X >= k) for X ~ Binomial(m, p), summed in log space.
double binomial_upper_tail(int k, int m, double p);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace isoperi
