#include <doctest.h>

#include <cmath>

#include "isoperi/errors.hpp"
#include "isoperi/model.hpp"

using namespace isoperi;

namespace {

ModelSpec iso(double s, Vector theta1, double theta0, LinkKind link = LinkKind::logistic()) {
  return ModelSpec(SphericalCov{s}, std::move(theta1), theta0, link);
}

Vector unit(int d, int k) {
  Vector v = Vector::Zero(d);
  v(k) = 1.0;
  return v;
}

}  // namespace

TEST_CASE("links") {
  CHECK(link_value(LinkKind::logistic(), 0.0) == 0.5);
  CHECK(link_value(LinkKind::probit(), 0.0) == 0.5);
  for (int t = -20; t <= 20; ++t) {
    CHECK(link_value(LinkKind::logistic(), t) + link_value(LinkKind::logistic(), -t) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(link_value(LinkKind::probit(), t) + link_value(LinkKind::probit(), -t) == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK(std::abs(normal_cdf(1.959964) - 0.975) < 1e-6);
  CHECK(std::abs(normal_cdf(-1.281552) - 0.1) < 1e-6);
  CHECK(std::abs(normal_cdf(40.0) - 1.0) < 1e-15);
  CHECK(log_link_value(LinkKind::probit(), -40.0) == doctest::Approx(-804.6084420137538).epsilon(1e-10));
  CHECK(log_link_value(LinkKind::logistic(), -800.0) == doctest::Approx(-800.0));
  CHECK_FALSE(LinkKind::probit().lipschitz_of_log().has_value());
}

TEST_CASE("losses") {
  const LossSpec lg = LossSpec::logistic(), hg = LossSpec::hinge();
  CHECK(loss_value(lg, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(loss_value(lg, -100.0) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(loss_value(lg, 800.0) >= 0.0);
  CHECK(loss_value(hg, 2.0) == 0.0);
  CHECK(loss_value(hg, 0.0) == 1.0);
  CHECK(loss_subgradient(hg, 1.0) == 0.0);
  CHECK(loss_subgradient(hg, 0.5) == -1.0);
  CHECK(loss_subgradient(lg, 0.0) == doctest::Approx(-0.5));
  // Lipschitz with L = 1
  for (int i = -50; i <= 50; ++i) {
    const double a = 0.37 * i, b = a + 0.13;
    CHECK(std::abs(loss_value(lg, a) - loss_value(lg, b)) <= 0.13 + 1e-12);
    CHECK(std::abs(loss_value(hg, a) - loss_value(hg, b)) <= 0.13 + 1e-12);
  }
  CHECK_THROWS_AS(parse_loss("squared"), ConfigError);
}

TEST_CASE("covariance structures agree") {
  Vector dg(3);
  dg << 1.0, 4.0, 0.5;
  const Covariance d(DiagonalCov{dg}, 3);
  const Covariance f(FullCov{Matrix(dg.asDiagonal())}, 3);
  Vector v(3);
  v << 1.0, -2.0, 0.3;
  CHECK(d.quad(v) == doctest::Approx(f.quad(v)));
  CHECK(d.trace() == doctest::Approx(5.5));
  CHECK(d.lambda_max() == doctest::Approx(4.0));
  CHECK(f.lambda_max() == doctest::Approx(4.0));
  CHECK((d.apply(v) - f.apply(v)).norm() < 1e-14);
  const Covariance s(SphericalCov{0.2}, 5);
  CHECK(s.trace() == doctest::Approx(1.0));
  CHECK(s.dense().isApprox(0.2 * Matrix::Identity(5, 5)));
}

TEST_CASE("invalid covariances are rejected") {
  CHECK_THROWS_AS(Covariance(SphericalCov{-1.0}, 2), ConfigError);
  Matrix m(2, 2);
  m << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(Covariance(FullCov{m}, 2), ConfigError);
  m << 1.0, 0.5, 0.4, 1.0;
  CHECK_THROWS_AS(Covariance(FullCov{m}, 2), ConfigError);
  CHECK_THROWS_AS(ModelSpec(DiagonalCov{Vector::Ones(2)}, Vector::Zero(3), 0.0, LinkKind::logistic()), ConfigError);
}

TEST_CASE("sampler: symmetric labels and determinism") {
  const ModelSpec m = iso(1.0, Vector::Zero(1), 0.0);
  const Dataset a = sample_dataset(m, 100000, 11);
  CHECK(std::abs(a.y.mean()) < 3.0 / std::sqrt(100000.0));
  const Dataset b = sample_dataset(m, 100000, 11);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  // prefix stability
  const Dataset c = sample_dataset(m, 10, 11);
  CHECK(c.x == a.x.topRows(10));
}

TEST_CASE("sampler: degenerate signal follows g(theta0)") {
  const ModelSpec m = iso(1.0, Vector::Zero(2), 10.0);
  const int n = 200000;
  const Dataset a = sample_dataset(m, n, 3);
  const double p = (a.y.array() > 0).cast<double>().mean();
  const double g = link_value(LinkKind::logistic(), 10.0);
  CHECK(g == doctest::Approx(0.9999546).epsilon(1e-7));
  CHECK(std::abs(p - g) < 3.0 * std::sqrt(g * (1 - g) / n) + 1.0 / n);
}

TEST_CASE("sampler: balanced labels and input moments") {
  const ModelSpec m = iso(1.0, unit(2, 0), 0.0);
  const int n = 1000000;
  const Dataset a = sample_dataset(m, n, 5);
  const double p = (a.y.array() > 0).cast<double>().mean();
  CHECK(std::abs(p - 0.5) < 3.0 * 0.5 / std::sqrt(n));
  CHECK(std::abs(a.x.col(1).mean()) < 4.0 / std::sqrt(n));
  CHECK(std::abs(a.x.col(1).squaredNorm() / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("label-weighted map") {
  Dataset d;
  d.x = Matrix(2, 2);
  d.x << 1.0, 2.0, 3.0, 4.0;
  d.y = Vector(2);
  d.y << -1.0, 1.0;
  const Dataset z = to_label_weighted(d);
  CHECK(z.x(0, 0) == -1.0);
  CHECK(z.x(0, 1) == -2.0);
  CHECK(z.x.row(1) == d.x.row(1));
  CHECK(to_label_weighted(z).x == d.x);
  CHECK(z.y == d.y);
}

TEST_CASE("effective bias and second moment") {
  Vector mu(2), t1(2);
  mu << 1.0, 2.0;
  t1 << 0.5, 0.0;
  const ModelSpec m(SphericalCov{2.0}, t1, 0.25, mu, LinkKind::logistic());
  CHECK(m.effective_bias() == doctest::Approx(0.75));
  CHECK(m.trace_second_moment() == doctest::Approx(9.0));
  CHECK_FALSE(m.central());
  CHECK(m.with_mu(Vector::Zero(2)).central());
}
