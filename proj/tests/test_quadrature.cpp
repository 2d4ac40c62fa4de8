#include <doctest.h>

#include <cmath>
#include <numbers>

#include "isoperi/errors.hpp"
#include "isoperi/model.hpp"
#include "isoperi/quadrature.hpp"

using namespace isoperi;

TEST_CASE("gauss-hermite moments of the standard normal") {
  const QuadratureRule& r = cached_gauss_hermite(40);
  CHECK(r.apply([](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(r.apply([](double t) { return t; })) < 1e-14);
  CHECK(r.apply([](double t) { return t * t; }) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(r.apply([](double t) { return std::pow(t, 8); }) == doctest::Approx(105.0).epsilon(1e-12));
  CHECK(r.apply([](double t) { return std::cos(t); }) == doctest::Approx(std::exp(-0.5)).epsilon(1e-13));
}

TEST_CASE("half-range hermite moments") {
  const QuadratureRule& r = cached_half_range_hermite(30);
  const double inv = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  CHECK(r.apply([](double) { return 1.0; }) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.apply([](double t) { return t; }) == doctest::Approx(inv).epsilon(1e-12));
  CHECK(r.apply([](double t) { return t * t; }) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.apply([](double t) { return t * t * t; }) == doctest::Approx(2.0 * inv).epsilon(1e-12));
  CHECK(r.apply([](double t) { return std::pow(t, 4); }) == doctest::Approx(1.5).epsilon(1e-12));
  for (double x : r.nodes) CHECK(x > 0.0);
}

TEST_CASE("laguerre and legendre rules") {
  const QuadratureRule& l = cached_gauss_laguerre(20);
  CHECK(l.apply([](double u) { return std::pow(u, 5); }) == doctest::Approx(120.0).epsilon(1e-12));
  const QuadratureRule g = gauss_legendre(10);
  CHECK(g.apply([](double x) { return x * x; }) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(g.apply([](double x) { return std::pow(x, 18); }) == doctest::Approx(2.0 / 19.0).epsilon(1e-13));
}

TEST_CASE("order limits are enforced") {
  CHECK_THROWS_AS(gauss_hermite(0), ConfigError);
  CHECK_THROWS_AS(gauss_hermite(501), ConfigError);
  CHECK_THROWS_AS(half_range_hermite(321), ConfigError);
}

TEST_CASE("expect_normal handles scales and point masses") {
  const ExpectationOptions opt;
  CHECK(expect_normal([](double t) { return t * t; }, 3.0, opt, "t2") == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(expect_normal([](double t) { return std::exp(-std::abs(t)); }, 0.0, opt, "pm") == 1.0);
  for (double s : {0.1, 1.0, 3.0}) {
    CHECK(expect_normal([](double t) { return std::cos(t); }, s, opt, "cos") ==
          doctest::Approx(std::exp(-0.5 * s * s)).epsilon(1e-12));
  }
  CHECK(expect_normal([](double t) { return std::exp(-t * t / 2e4); }, 100.0, opt, "wide") ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-10));
  CHECK_THROWS_AS(expect_normal([](double) { return 1.0; }, -1.0, opt, "neg"), ConfigError);
  // a kink at the origin defeats Gauss-Hermite; the order doubling notices
  CHECK_THROWS_AS(expect_normal([](double t) { return std::exp(-std::abs(t)); }, 1.0, opt, "kink"), NumericalError);
}

TEST_CASE("half-line tilt matches e^{a^2/2} Phi(a)") {
  const ExpectationOptions opt;
  for (double a : {-20.0, -3.0, -0.5, 0.0, 0.7, 2.0, 8.0}) {
    const double exact = 0.5 * a * a + std::log(normal_cdf(a));
    CHECK(log_half_line_tilt(a, opt) == doctest::Approx(exact).epsilon(1e-9));
  }
}
