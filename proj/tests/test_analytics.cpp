#include <doctest.h>

#include <cmath>
#include <numbers>

#include "isoperi/analytics.hpp"
#include "isoperi/errors.hpp"
#include "isoperi/rng.hpp"

using namespace isoperi;

namespace {

ModelSpec one_d(double sigma, double theta0, LinkKind link = LinkKind::logistic()) {
  return ModelSpec(SphericalCov{1.0}, Vector::Constant(1, sigma), theta0, link);
}

// Trapezoid integral of f on [-12, 12] with N(0,1) weight.
template <class F>
double trapezoid_normal(F f, int panels = 48000) {
  const double a = -12.0, h = 24.0 / panels;
  double acc = 0.0;
  for (int i = 0; i <= panels; ++i) {
    const double z = a + i * h;
    const double w = (i == 0 || i == panels) ? 0.5 : 1.0;
    acc += w * f(z) * normal_pdf(z);
  }
  return acc * h;
}

// chi^2(P_Z || P_{Z|y}) from the explicit 1-D densities for X ~ N(0,1), theta1 = 1:
// p(z, y) = phi(z) g(z + y theta0).
double chi2_brute(double theta0, int y) {
  auto g = [](double t) { return link_value(LinkKind::logistic(), t); };
  const double py = trapezoid_normal([&](double z) { return g(z + y * theta0); });
  return trapezoid_normal([&](double z) {
           const double pz = g(z + theta0) + g(z - theta0);
           return pz * pz * py / g(z + y * theta0);
         }) -
         1.0;
}

}  // namespace

TEST_CASE("signal variance") {
  Vector d(2);
  d << 1.0, 4.0;
  const ModelSpec m(DiagonalCov{d}, Vector::Ones(2), 0.0, LinkKind::logistic());
  CHECK(signal_variance(m) == doctest::Approx(5.0));
  CHECK(signal_variance(ModelSpec(SphericalCov{1.0}, Vector::Zero(3), 0.0, LinkKind::logistic())) == 0.0);
}

TEST_CASE("mgf closed form and Monte Carlo") {
  const ModelSpec m(SphericalCov{1.0}, Vector::Zero(3), 0.0, LinkKind::logistic());
  CHECK(mgf(m, Vector::Zero(3)) == 1.0);
  Vector t = Vector::Zero(3);
  t(0) = 1.0;
  CHECK(mgf(m, t) == doctest::Approx(std::exp(0.5)).epsilon(1e-15));
  t = Vector::Ones(3);
  RandomStream s(123, 0);
  const int n = 200000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double v = std::exp(s.normal() + s.normal() + s.normal());
    sum += v;
    sum2 += v * v;
  }
  const double mc = sum / n, se = std::sqrt((sum2 / n - mc * mc) / n);
  CHECK(std::abs(mgf(m, t) - mc) < 3.0 * se);
  CHECK_THROWS_AS(mgf(m, Vector::Constant(3, 30.0)), NumericalError);
  CHECK(log_mgf(m, Vector::Constant(3, 30.0)) == doctest::Approx(1350.0));
}

TEST_CASE("num and den mgf variants") {
  const ModelSpec flat = one_d(0.0, 0.0);
  CHECK(mgf_num(flat, 1.0) == 1.0);
  CHECK(mgf_den(flat, 1.0) == 1.0);
  for (double s : {0.3, 1.0, 2.5}) {
    const ModelSpec m = one_d(s, 0.0);
    const double num = 0.5 + std::exp(0.5 * s * s) * normal_cdf(s);
    const double den = 0.5 + std::exp(0.5 * s * s) * normal_cdf(-s);
    CHECK(mgf_num(m, 1.0) == doctest::Approx(num).epsilon(1e-10));
    CHECK(mgf_den(m, 1.0) == doctest::Approx(den).epsilon(1e-10));
    CHECK(mgf_num(m, 1.0) >= 1.0);
    CHECK(mgf_den(m, 1.0) <= 1.0);
    CHECK(mgf_num(m, 1.0) <= 2.0 * std::exp(0.5 * s * s));
    CHECK(mgf_den(m, 1.0) >= std::exp(-s * std::sqrt(2.0 / std::numbers::pi) / 2.0));
  }
  CHECK(mgf_num(one_d(1.0, 0.0), 1.0) == doctest::Approx(1.8871430).epsilon(1e-7));
}

TEST_CASE("tilde_m_inverse closed form and bound") {
  CHECK(tilde_m_inverse(one_d(0.0, 0.0)) == 1.0);
  for (double s : {0.1, 1.0, 3.0, 10.0}) {
    const double exact = 2.0 * std::exp(0.5 * s * s) * normal_cdf(-s);
    CHECK(std::abs(tilde_m_inverse(one_d(s, 0.0)) - exact) <= 1e-10);
    // Mills ratio: 1 - Phi(s) <= phi(s) / s gives 2 / sqrt(2 pi s^2)
    CHECK(tilde_m_inverse(one_d(s, 0.0)) <= 2.0 / std::sqrt(2.0 * std::numbers::pi * s * s));
  }
  CHECK(tilde_m_inverse(one_d(1.0, 0.0)) == doctest::Approx(0.5231).epsilon(1e-4));
  CHECK(tilde_m_inverse(one_d(100.0, 0.0)) <= 0.007979);
  CHECK(tilde_m_inverse(one_d(100.0, 0.0)) > 0.003989);
}

TEST_CASE("p_exceed") {
  CHECK(p_exceed(one_d(2.0, 0.0)) == 0.5);
  CHECK(std::abs(p_exceed(one_d(2.0, 2.0 * 1.959964)) - 0.025) < 1e-6);
  CHECK(p_exceed(one_d(0.0, 1.0)) == 0.0);
  CHECK(p_exceed(one_d(0.0, 0.0)) == 0.5);
}

TEST_CASE("label_prob") {
  CHECK(label_prob(one_d(3.0, 0.0)) == 0.5);
  CHECK(label_prob(one_d(0.0, 1.3)) == doctest::Approx(link_value(LinkKind::logistic(), 1.3)));
  const double oracle = trapezoid_normal([](double z) { return link_value(LinkKind::logistic(), z + 1.0); });
  CHECK(label_prob(one_d(1.0, 1.0)) == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("chi2_conditional") {
  CHECK(std::abs(chi2_conditional(one_d(1.0, 0.0), 1)) <= 1e-10);
  CHECK(std::abs(chi2_conditional(one_d(1.0, 0.0), -1)) <= 1e-10);
  for (int y : {1, -1}) CHECK(std::abs(chi2_conditional(one_d(1.0, 0.5), y) - chi2_brute(0.5, y)) < 1e-6);
  for (int i = 0; i <= 20; ++i) {
    const double t0 = 0.1 * i;
    const double bound = std::expm1(2.0 * t0);
    for (int y : {1, -1}) CHECK(chi2_conditional(one_d(1.0, t0), y) <= bound + 1e-12);
  }
}

TEST_CASE("k_constants") {
  const ModelSpec bal(SphericalCov{1.0}, Vector::Ones(4) * 0.5, 0.0, LinkKind::logistic());
  const KConstants k = k_constants(bal, KRequest{});
  CHECK(k.k_v == doctest::Approx(1.0));
  CHECK(k.k_u == doctest::Approx(2.0));
  CHECK(k.k_chi2 < 1e-10);
  CHECK(k.k_p == 1.0);
  CHECK(k.k_ls == 1.0);
  const ModelSpec scaled(SphericalCov{1.0 / 8}, Vector::Ones(8), 0.0, LinkKind::logistic());
  CHECK(k_constants(scaled, KRequest{}).k_ls == doctest::Approx(1.0 / 8));

  const ModelSpec biased = bal.with_theta0(0.8);
  const KConstants kb = k_constants(biased, KRequest{});
  CHECK(kb.k_v == doctest::Approx(4.0 * kb.p_plus * kb.p_minus));
  CHECK(kb.k_u == doctest::Approx(1.0 / kb.p_minus));
  CHECK(kb.p_plus + kb.p_minus == doctest::Approx(1.0).epsilon(1e-12));

  KRequest kls;
  kls.strategy_p = KStrategy::kls_sqrt_log;
  CHECK_THROWS_AS(k_constants(bal, kls), ConfigError);
  kls.c_kls_user = 2.0;
  CHECK(k_constants(bal, kls).k_p == doctest::Approx(2.0 * std::sqrt(std::log(4.0))));
  kls.strategy_p = KStrategy::kls_trace;
  CHECK(k_constants(bal, kls).k_p == doctest::Approx(2.0 * 2.0));
  KRequest over;
  over.strategy_p = KStrategy::user_override;
  over.k_p_override = 0.3;
  CHECK(k_constants(bal, over).k_p == 0.3);
}

TEST_CASE("probit chi2 in the far tail reports instead of returning garbage") {
  const ModelSpec m = one_d(5.0, 30.0, LinkKind::probit());
  const KConstants k = k_constants(m, KRequest{});
  CHECK((std::isinf(k.k_chi2) || k.k_chi2 >= 0.0));
  if (std::isinf(k.k_chi2)) CHECK_FALSE(k.notes.empty());
}
