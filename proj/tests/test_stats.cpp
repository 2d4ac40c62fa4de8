#include <doctest.h>

#include <cmath>
#include <vector>

#include "isoperi/stats.hpp"

using namespace isoperi;

namespace {

double binom_pmf(int k, int m, double p) {
  double c = 1.0;
  for (int i = 0; i < k; ++i) c = c * (m - i) / (i + 1);
  return c * std::pow(p, k) * std::pow(1.0 - p, m - k);
}

}  // namespace

TEST_CASE("mean, sd and standard error") {
  const std::vector<double> x{1, 2, 3, 4};
  CHECK(mean(x) == doctest::Approx(2.5));
  CHECK(sample_sd(x) == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(standard_error(x) == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(sample_sd({3.0}) == 0.0);
}

TEST_CASE("binomial upper tail matches the direct sum") {
  for (int m : {1, 10, 40}) {
    for (double p : {0.01, 0.2, 0.5, 0.9}) {
      for (int k = 0; k <= m; k += std::max(1, m / 7)) {
        double direct = 0.0;
        for (int j = k; j <= m; ++j) direct += binom_pmf(j, m, p);
        CHECK(binomial_upper_tail(k, m, p) == doctest::Approx(direct).epsilon(1e-10));
      }
    }
  }
  CHECK(binomial_upper_tail(0, 2000, 0.1) == 1.0);
  CHECK(binomial_upper_tail(5, 10, 0.0) == 0.0);
  CHECK(binomial_upper_tail(10, 10, 1.0) == doctest::Approx(1.0));
  // far tail stays positive and tiny
  const double far = binomial_upper_tail(600, 2000, 0.1);
  CHECK(far > 0.0);
  CHECK(far < 1e-100);
}

TEST_CASE("spearman with ties and linear fit") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  // ranks of y with ties: 1.5 1.5 3 4 -> Pearson with 1..4
  const double r = spearman({1, 2, 3, 4}, {5, 5, 6, 7});
  CHECK(r == doctest::Approx(0.9486832980505138));
  const LinearFit f = linear_fit({0, 1, 2, 3}, {1, 3, 5, 7});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
}
