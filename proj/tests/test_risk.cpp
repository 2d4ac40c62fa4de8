#include <doctest.h>

#include <cmath>
#include <utility>

#include "isoperi/errors.hpp"
#include "isoperi/risk.hpp"
#include "isoperi/rng.hpp"

using namespace isoperi;

namespace {

ModelSpec model(int d, double s, double theta_scale, double theta0) {
  Vector t = Vector::Zero(d);
  t(0) = theta_scale;
  if (d > 1) t(1) = -0.5 * theta_scale;
  return ModelSpec(SphericalCov{s}, t, theta0, LinkKind::logistic());
}

Vector random_ball(RandomStream& rs, int d, double r) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v(i) = rs.normal();
  return v * (r * std::pow(rs.uniform(), 1.0 / d) / v.norm());
}

// Population risk for d = 1, X ~ N(0, s^2), theta1 = theta, by trapezoid.
double risk_1d(const LossSpec& loss, double s, double theta, double theta0, double w, double b, int panels = 40000) {
  const double h = 24.0 / panels;
  double acc = 0.0;
  for (int i = 0; i <= panels; ++i) {
    const double u = -12.0 + i * h;
    const double x = s * u;
    const double gp = link_value(LinkKind::logistic(), theta * x + theta0);
    const double v = gp * loss_value(loss, w * x + b) + (1.0 - gp) * loss_value(loss, -(w * x + b));
    acc += ((i == 0 || i == panels) ? 0.5 : 1.0) * v * normal_pdf(u);
  }
  return acc * h;
}

}  // namespace

TEST_CASE("empirical risk on hand datasets") {
  Dataset d;
  d.x = Matrix(3, 1);
  d.x << 1.0, -2.0, 0.5;
  d.y = Vector(3);
  d.y << 1.0, 1.0, -1.0;
  Vector w = Vector::Constant(1, 1.0);
  // margins y(x w + b) with b = 0.5: 1.5, -1.5, -1.0
  const double hinge = (0.0 + 2.5 + 2.0) / 3.0;
  CHECK(empirical_risk(d, LossSpec::hinge(), w, 0.5) == doctest::Approx(hinge));
  const double lg = (std::log1p(std::exp(-1.5)) + std::log1p(std::exp(1.5)) + std::log1p(std::exp(1.0))) / 3.0;
  CHECK(empirical_risk(d, LossSpec::logistic(), w, 0.5) == doctest::Approx(lg).epsilon(1e-14));
  Vector gw;
  double gb;
  EmpiricalRisk er(d, LossSpec::hinge());
  er.value_and_gradient(w, 0.5, gw, gb);
  // active: rows 2 and 3, -y x / n and -y / n
  CHECK(gw(0) == doctest::Approx((2.0 + 0.5) / 3.0));
  CHECK(gb == doctest::Approx(0.0));
}

TEST_CASE("population risk at the origin and against 1-D integration") {
  const ModelSpec m = model(3, 0.5, 1.0, 0.3);
  CHECK(population_risk(m, LossSpec::logistic(), Vector::Zero(3), 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(population_risk(m, LossSpec::hinge(), Vector::Zero(3), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
  const ModelSpec m1(SphericalCov{0.81}, Vector::Constant(1, 1.4), 0.6, LinkKind::logistic());
  for (const LossSpec& loss : {LossSpec::logistic(), LossSpec::hinge()}) {
    for (double w : {-0.9, 0.2, 0.8}) {
      for (double b : {-0.4, 0.0, 0.3}) {
        const double oracle = risk_1d(loss, 0.9, 1.4, 0.6, w, b);
        CHECK(population_risk(m1, loss, Vector::Constant(1, w), b) == doctest::Approx(oracle).epsilon(1e-7));
      }
    }
  }
}

TEST_CASE("specialized and generic paths agree") {
  RandomStream rs(5, 0);
  const ModelSpec m = model(4, 0.3, 1.2, -0.4);
  // the tensorized rule is smooth-loss accurate only; the hinge comparison is loose
  for (const auto& [loss, tol] : {std::pair{LossSpec::logistic(), 1e-9}, std::pair{LossSpec::hinge(), 1e-3}}) {
    const PopulationRisk pr(m, loss, 80);
    for (int i = 0; i < 10; ++i) {
      const Vector w = random_ball(rs, 4, 1.5);
      const double b = rs.uniform() - 0.5;
      CHECK(pr.value(w, b) == doctest::Approx(pr.value_generic(w, b)).epsilon(tol));
    }
  }
}

TEST_CASE("hinge risk near the rank-1 corner") {
  // Oracle: trapezoid over u = T / sd(T) of g(T + theta0) E[max(0, 1 - S - b) | T] + (label flip), with
  // E max(0, M + tau V) = M Phi(M / tau) + tau phi(M / tau).
  const double s = 0.7, t0 = 0.4;
  Vector t1(2);
  t1 << 1.1, -0.3;
  const ModelSpec m(SphericalCov{s}, t1, t0, LinkKind::logistic());
  const auto relu = [](double mm, double tau) {
    return tau > 0.0 ? mm * normal_cdf(mm / tau) + tau * normal_pdf(mm / tau) : std::max(mm, 0.0);
  };
  Vector perp(2);
  perp << 0.3, 1.1;
  for (double eps : {0.0, 1e-6, 1e-3, 0.05, 0.5}) {
    for (double scale : {0.05, 0.4, 1.3}) {
      const Vector w = scale * (t1 + eps * perp).normalized();
      const double b = 0.15;
      const double vt = s * t1.squaredNorm(), q = s * w.squaredNorm(), c = s * w.dot(t1);
      const double tau = std::sqrt(std::max(0.0, q - c * c / vt)), slope = c / std::sqrt(vt);
      const int panels = 60000;
      const double h = 24.0 / panels;
      double acc = 0.0;
      for (int i = 0; i <= panels; ++i) {
        const double u = -12.0 + i * h;
        const double gp = link_value(LinkKind::logistic(), std::sqrt(vt) * u + t0);
        const double shift = b + slope * u;
        const double v = gp * relu(1.0 - shift, tau) + (1.0 - gp) * relu(1.0 + shift, tau);
        acc += ((i == 0 || i == panels) ? 0.5 : 1.0) * v * normal_pdf(u);
      }
      CHECK(population_risk(m, LossSpec::hinge(), w, b) == doctest::Approx(acc * h).epsilon(1e-7));
    }
  }
}

TEST_CASE("population risk matches Monte Carlo") {
  const ModelSpec m = model(3, 0.5, 1.0, 0.3);
  const Dataset big = sample_dataset(m, 200000, 99);
  Vector w(3);
  w << 0.4, -0.2, 0.6;
  for (const LossSpec& loss : {LossSpec::logistic(), LossSpec::hinge()}) {
    const double pop = population_risk(m, loss, w, 0.2);
    const double emp = empirical_risk(big, loss, w, 0.2);
    CHECK(std::abs(pop - emp) < 4.0 * 1.5 / std::sqrt(200000.0));
  }
}

TEST_CASE("sign symmetry at zero bias") {
  const ModelSpec m = model(3, 0.5, 1.0, 0.0);
  Vector w(3);
  w << 0.3, 0.1, -0.5;
  for (const LossSpec& loss : {LossSpec::logistic(), LossSpec::hinge()})
    CHECK(population_risk(m, loss, w, 0.4) == doctest::Approx(population_risk(m, loss, w, -0.4)).epsilon(1e-12));
}

TEST_CASE("gradient check") {
  RandomStream rs(11, 0);
  const ModelSpec m = model(5, 0.2, 1.0, 0.5);
  for (int i = 0; i < 20; ++i) {
    const Vector w = random_ball(rs, 5, 1.0);
    const double b = rs.uniform() - 0.5;
    CHECK(gradient_check(m, LossSpec::logistic(), w, b) <= 1e-5);
  }
  CHECK(gradient_check(m, LossSpec::logistic(), Vector::Zero(5), 0.0) <= 1e-6);
}

TEST_CASE("gap is zero at the origin and small at large n") {
  const ModelSpec m = model(2, 1.0, 1.0, 0.0);
  const Dataset d = sample_dataset(m, 100000, 4);
  CHECK(std::abs(gap(d, m, LossSpec::logistic(), Vector::Zero(2), 0.0)) < 1e-10);
  CHECK(std::abs(gap(d, m, LossSpec::hinge(), Vector::Zero(2), 0.0)) < 1e-10);
  Vector w(2);
  w << 0.7, -0.3;
  CHECK(std::abs(gap(d, m, LossSpec::logistic(), w, 0.2)) < 4.0 / std::sqrt(100000.0) * 1.5);
}

TEST_CASE("sup_gap agrees with a dense 1-D scan (hinge, n = 3)") {
  const ModelSpec m(SphericalCov{1.0}, Vector::Constant(1, 1.0), 0.0, LinkKind::logistic());
  const Dataset d = sample_dataset(m, 3, 21);
  const LossSpec hinge = LossSpec::hinge();
  double best = -INFINITY;
  for (int i = 0; i <= 2000; ++i) {
    const double w = -1.0 + i / 1000.0;
    best = std::max(best, risk_1d(hinge, 1.0, 1.0, 0.0, w, 0.0, 6000) -
                              empirical_risk(d, hinge, Vector::Constant(1, w), 0.0));
  }
  OptimizerConfig cfg;
  const SupResult r = sup_gap(d, m, hinge, {1.0, 0.0}, cfg, 3);
  CHECK(r.value >= best - 1e-5);
  CHECK(r.value <= best + 2e-3);
  CHECK(std::abs(r.argmax_w(0)) <= 1.0 + 1e-12);
}

TEST_CASE("sup_gap vs grid oracle in 2-D") {
  const ModelSpec m = model(2, 1.0, 1.0, 0.3);
  for (const LossSpec& loss : {LossSpec::logistic(), LossSpec::hinge()}) {
    const Dataset d = sample_dataset(m, 100, 8);
    const double oracle = grid_oracle_sup(d, m, loss, {1.0, 0.5}, 41);
    const SupResult r = sup_gap(d, m, loss, {1.0, 0.5}, OptimizerConfig{}, 1);
    CHECK(std::abs(r.value - oracle) / std::max(oracle, 1e-3) <= 1e-3);
    CHECK(r.argmax_w.norm() <= 1.0 + 1e-12);
    CHECK(std::abs(r.argmax_b) <= 0.5 + 1e-12);
  }
}

TEST_CASE("sup_gap options") {
  const ModelSpec m = model(3, 0.4, 1.0, 0.0);
  const Dataset d = sample_dataset(m, 60, 2);
  OptimizerConfig cfg;
  cfg.audit_points = 200;
  const SupResult a = sup_gap(d, m, LossSpec::logistic(), {1.0, 0.5}, cfg, 9);
  const SupResult b = sup_gap(d, m, LossSpec::logistic(), {1.0, 0.5}, cfg, 9);
  CHECK(a.value == b.value);
  CHECK(a.value >= 0.0);
  CHECK(a.audit_violations == 0);
  cfg.negate = true;
  const SupResult n = sup_gap(d, m, LossSpec::logistic(), {1.0, 0.5}, cfg, 9);
  CHECK(n.value >= 0.0);
  CHECK(n.value == doctest::Approx(grid_oracle_sup(d, m, LossSpec::logistic(), {1.0, 0.5}, 21, true)).epsilon(1e-3));
  const SupResult zero = sup_gap(d, m, LossSpec::logistic(), {0.0, 0.0}, OptimizerConfig{}, 1);
  CHECK(std::abs(zero.value) < 1e-14);
  OptimizerConfig bad;
  bad.restarts = 0;
  CHECK_THROWS_AS(sup_gap(d, m, LossSpec::logistic(), {1.0, 0.5}, bad, 1), ConfigError);
  CHECK_THROWS_AS(grid_oracle_sup(sample_dataset(model(4, 1, 1, 0), 10, 1), model(4, 1, 1, 0), LossSpec::logistic(),
                                  {1.0, 0.0}, 11),
                  ConfigError);
}
