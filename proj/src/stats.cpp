// SPDX-License-Identifier: Apache-2.0
#include "isoperi/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "isoperi/errors.hpp"

namespace isoperi {

double mean(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_sd(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double standard_error(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  return sample_sd(x) / std::sqrt(static_cast<double>(x.size()));
}

double binomial_upper_tail(int k, int m, double p) {
  if (m < 0 || k < 0) throw ConfigError("binomial_upper_tail: negative count");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("binomial_upper_tail: p outside [0,1]");
  if (k == 0) return 1.0;
  if (k > m) return 0.0;
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  const double lp = std::log(p), lq = std::log1p(-p);
  const double lgm = std::lgamma(m + 1.0);
  std::vector<double> terms;
  terms.reserve(m - k + 1);
  double top = -std::numeric_limits<double>::infinity();
  for (int j = k; j <= m; ++j) {
    const double t = lgm - std::lgamma(j + 1.0) - std::lgamma(m - j + 1.0) + j * lp + (m - j) * lq;
    terms.push_back(t);
    top = std::max(top, t);
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - top);
  return std::min(1.0, std::exp(top + std::log(s)));
}

namespace {

std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("spearman needs two equal-length samples of size >= 2");
  return pearson(ranks(x), ranks(y));
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("linear_fit needs two equal-length samples of size >= 2");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw ConfigError("linear_fit: x has no spread");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

}  // namespace isoperi
