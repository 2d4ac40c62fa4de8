#include <doctest.h>

#include <cmath>
#include <numbers>

#include "isoperi/bounds.hpp"
#include "isoperi/errors.hpp"
#include "isoperi/rng.hpp"

using namespace isoperi;

namespace {

const double kE = std::numbers::e;
// log(3/delta) = 2; the examples quoted at log(3/delta) = 1 double here.
const double kDeltaP = 3.0 * std::exp(-2.0);
const double kDeltaLS = std::exp(-1.0);

KConstants unit_k(double kp = 1.0, double kls = 1.0) {
  KConstants k;
  k.k_p = kp;
  k.k_ls = kls;
  k.k_v = 1.0;
  k.k_u = 2.0;
  return k;
}

ModelSpec one_d(double sigma, double theta0, LinkKind link = LinkKind::logistic()) {
  return ModelSpec(SphericalCov{1.0}, Vector::Constant(1, sigma), theta0, link);
}

BoundInput input(const ModelSpec& m, Mode mode, double r_w, double r_b, int n, double delta, KConstants k = unit_k()) {
  return BoundInput{m, {r_w, r_b}, 1.0, n, delta, k, mode, LossSpec::logistic()};
}

double val(const ResidualResult& r) {
  REQUIRE(r.applicable());
  return r.residual->value;
}

using Fn = ResidualResult (*)(const BoundInput&);
const Fn kAll[] = {residual_no_bias, residual_small_bias, residual_large_bias, residual_weak_signal,
                   residual_strong_signal, residual_noncentral};

}  // namespace

TEST_CASE("rademacher bound examples") {
  CHECK(rademacher_bound(1, 1, 0, 1, 100) == doctest::Approx(0.2));
  CHECK(rademacher_bound(1, 0, 1, 5, 400) == doctest::Approx(0.1));
  CHECK_THROWS_AS(rademacher_bound(1, 1, 0, -1, 10), ConfigError);
}

TEST_CASE("no_bias examples") {
  const ModelSpec m = one_d(1.0, 0.0);
  CHECK(val(residual_no_bias(input(m, Mode::poincare, 1, 0, 100, kDeltaP))) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(val(residual_no_bias(input(m, Mode::logsobolev, 1, 0, 100, kDeltaLS))) ==
        doctest::Approx(std::sqrt(0.02)).epsilon(1e-14));
  CHECK(val(residual_no_bias(input(m, Mode::logsobolev, 0, 0, 100, 0.1))) == 0.0);
  CHECK_FALSE(residual_no_bias(input(one_d(1.0, 0.3), Mode::poincare, 1, 0, 100, 0.1)).applicable());
}

TEST_CASE("small_bias examples") {
  const ModelSpec m = one_d(1.0, 0.0);
  for (double rb : {0.0, 0.7}) {
    const BoundInput p = input(m, Mode::poincare, 1.3, rb, 50, 0.2);
    CHECK(val(residual_small_bias(p)) == doctest::Approx(val(residual_no_bias(p))).epsilon(1e-14));
  }
  const BoundInput ls = input(m, Mode::logsobolev, 1, 0, 100, kDeltaLS);
  CHECK(val(residual_small_bias(ls)) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(val(residual_small_bias(ls)) / val(residual_no_bias(ls)) == doctest::Approx(std::sqrt(4.5)).epsilon(1e-14));
  const ResidualResult pr = residual_small_bias(input(one_d(1.0, 0.5, LinkKind::probit()), Mode::poincare, 1, 0, 100, 0.1));
  CHECK_FALSE(pr.applicable());
  CHECK(pr.reason.find("not Lipschitz") != std::string::npos);
}

TEST_CASE("large_bias examples") {
  const ModelSpec flat = one_d(0.0, 0.0);
  CHECK(val(residual_large_bias(input(flat, Mode::poincare, 1, 0, 100, kDeltaP))) ==
        doctest::Approx(2.0 * std::sqrt(0.07)).epsilon(1e-14));
  double prev = INFINITY;
  for (int i = 0; i <= 30; ++i) {
    const double v = val(residual_large_bias(input(one_d(0.8, 0.5 * i), Mode::poincare, 1, 1, 100, 0.1)));
    CHECK(v <= prev * (1 + 1e-14));
    prev = v;
  }
  const double r10 = val(residual_large_bias(input(one_d(0.0, 10.0), Mode::logsobolev, 0, 1, 100, 0.1)));
  const double r0 = val(residual_large_bias(input(one_d(0.0, 0.0), Mode::logsobolev, 0, 1, 100, 0.1)));
  CHECK(r10 * r10 / (r0 * r0) == doctest::Approx((kE + 10.0) * std::exp(-10.0) / kE).epsilon(1e-12));
  CHECK_FALSE(residual_large_bias(input(one_d(1.0, 1.0, LinkKind::probit()), Mode::poincare, 1, 0, 100, 0.1)).applicable());
}

TEST_CASE("weak_signal examples") {
  CHECK(val(residual_weak_signal(input(one_d(0.0, 0.0), Mode::poincare, 1, 1, 100, kDeltaP))) ==
        doctest::Approx(2.0 * std::sqrt(5.0) / 10.0).epsilon(1e-13));
  const double at0 = val(residual_weak_signal(input(one_d(0.0, 0.4), Mode::poincare, 1, 1, 100, 0.1)));
  const double near = val(residual_weak_signal(input(one_d(1e-6, 0.4), Mode::poincare, 1, 1, 100, 0.1)));
  CHECK(near == doctest::Approx(at0).epsilon(1e-5));
  for (int i = 0; i <= 100; ++i) {
    const double t = 0.1 * i;
    CHECK(1.0 - 0.5 * log_link_value(LinkKind::logistic(), -t) <= (kE + t) / 2.0);
  }
}

TEST_CASE("strong_signal examples") {
  const ModelSpec m = one_d(100.0, 0.0);
  const double v = val(residual_strong_signal(input(m, Mode::poincare, 1, 0, 100, kDeltaP)));
  CHECK(v >= 0.2);
  // 1/M~ <= 0.007979 at sigma = 100
  CHECK(v <= 0.2 * std::sqrt(1.0 + 0.007979 + std::sqrt(0.007979)));
  // logsobolev ratio to no_bias approaches sqrt((e + log 2) 5/4) as 1/M~ -> 0
  const double limit = std::sqrt((kE + std::log(2.0)) * 1.25);
  CHECK(limit <= 2.07);
  const ModelSpec big = one_d(1e6, 0.0);
  const BoundInput ls = input(big, Mode::logsobolev, 1, 0, 100, 0.1);
  CHECK(val(residual_strong_signal(ls)) / val(residual_no_bias(ls)) == doctest::Approx(limit).epsilon(1e-5));
  // at sigma = 50 the ratio carries the extra 1/M~ term
  const ModelSpec s50 = one_d(50.0, 0.0);
  const BoundInput ls50 = input(s50, Mode::logsobolev, 1, 0, 100, 0.1);
  const double q = tilde_m_inverse(s50);
  CHECK(val(residual_strong_signal(ls50)) / val(residual_no_bias(ls50)) ==
        doctest::Approx(std::sqrt((kE + std::log(2.0)) * (1.25 + q))).epsilon(1e-10));
  // poincare R_w factor 1 + q + sqrt q increases with q
  double prev = 0;
  for (double s : {200.0, 50.0, 10.0, 2.0, 0.5}) {
    const double r = val(residual_strong_signal(input(one_d(s, 0.0), Mode::poincare, 1, 0, 100, 0.1)));
    CHECK(r > prev);
    prev = r;
  }
  CHECK_FALSE(residual_strong_signal(input(one_d(0.0, 1.0), Mode::logsobolev, 1, 0, 100, 0.1)).applicable());
}

TEST_CASE("noncentral continuity and shifts") {
  const ModelSpec m(SphericalCov{0.5}, Vector::Constant(2, 0.7), 0.3, LinkKind::logistic());
  const BoundInput p = input(m, Mode::poincare, 1, 0.5, 80, 0.1);
  CHECK(val(residual_noncentral(p)) == doctest::Approx(val(residual_small_bias(p))).epsilon(1e-14));
  Vector mu(2);
  mu << 1.0, -1.0;  // orthogonal to theta1
  BoundInput q = p;
  q.model = m.with_mu(mu);
  // only the R_b slot grows, by |mu|^2 R_w^2
  const double expect = std::sqrt(std::pow(val(residual_small_bias(p)), 2) +
                                  (1.0 + std::sqrt(std::expm1(0.6))) * 2.0 * std::pow(std::log(30.0), 2) / 80.0);
  CHECK(val(residual_noncentral(q)) == doctest::Approx(expect).epsilon(1e-12));
  // theta0 = -<mu, theta1> cancels the bias
  Vector mu2(2);
  mu2 << 0.3 / 0.7, 0.0;
  BoundInput c = p;
  c.model = ModelSpec(SphericalCov{0.5}, Vector::Constant(2, 0.7), -0.3, mu2, LinkKind::logistic());
  BoundInput nb = p;
  nb.model = m.with_theta0(0.0);
  nb.constraints.r_b = std::sqrt(0.25 + mu2.squaredNorm());
  CHECK(val(residual_noncentral(c)) == doctest::Approx(val(residual_no_bias(nb))).epsilon(1e-12));
  CHECK_FALSE(residual_small_bias(c).applicable());
}

TEST_CASE("generic route") {
  // c = inf with K_chi2 = 0: Gamma_Y weight one, the tensorization shape
  const KConstants k = unit_k(0.5, 0.5);
  const Residual r = residual_theorem1_generic(k, INFINITY, 1.0, 1.0, 1.0, 100, kDeltaP, Mode::poincare);
  CHECK(r.value == doctest::Approx(std::sqrt(0.5 + 1.0) * 2.0 / 10.0).epsilon(1e-14));
  CHECK_THROWS_AS(residual_theorem1_generic(k, 0.5, 1, 1, 1, 10, 0.1, Mode::poincare), ConfigError);
  // minimum over the c-grid never exceeds the c = 2 value
  KConstants kb = unit_k();
  kb.k_chi2 = 0.3;
  kb.k_v = 0.9;
  kb.k_u = 2.5;
  const BoundInput in = input(one_d(1.0, 0.2), Mode::logsobolev, 1, 0.5, 100, 0.1, kb);
  const double at2 = residual_theorem1_generic(kb, 2.0, 1, 1, 0.5, 100, 0.1, Mode::logsobolev).value;
  CHECK(val(residual_generic_best(in)) <= at2 * (1 + 1e-15));
  CHECK(generic_c_grid(kb).size() == 22);
  CHECK(generic_c_grid(unit_k()).size() == 23);
  // with the small-bias K substitutions the generic route is at least as tight
  for (int i = 0; i <= 20; ++i) {
    const double t0 = 0.1 * i, e = std::exp(2.0 * t0);
    KConstants ks = unit_k();
    ks.k_chi2 = e - 1.0;
    ks.k_u = 1.0 + e;
    const BoundInput b = input(one_d(1.0, t0), Mode::logsobolev, 1, 0.5, 100, 0.1, ks);
    CHECK(val(residual_generic_best(b)) <= val(residual_small_bias(b)));
  }
}

TEST_CASE("properties: homogeneity, monotonicity, mode dominance") {
  RandomStream rs(77, 0);
  for (int trial = 0; trial < 25; ++trial) {
    const double sigma = 0.05 + 2.0 * rs.uniform();
    const double t0 = 1.5 * rs.uniform();
    const ModelSpec m = one_d(sigma, t0);
    const KConstants k = k_constants(m, KRequest{});
    for (Mode mode : {Mode::poincare, Mode::logsobolev}) {
      BoundInput in = input(m, mode, 0.2 + rs.uniform(), rs.uniform(), 50, 0.2, k);
      for (Fn f : kAll) {
        const ResidualResult base = f(in);
        if (!base.applicable()) continue;
        const double v = base.residual->value;
        CHECK(v >= 0.0);
        CHECK(std::isfinite(v));
        BoundInput scaled = in;
        scaled.loss_lipschitz = 3.7;
        CHECK(val(f(scaled)) == doctest::Approx(3.7 * v).epsilon(1e-12));
        BoundInput more = in;
        more.n = 51;
        CHECK(val(f(more)) < v);
        BoundInput tighter = in.with_delta(0.05);
        CHECK(val(f(tighter)) >= v);
      }
    }
  }
  const ModelSpec m = one_d(1.0, 0.0);
  const double ratio_small = val(residual_no_bias(input(m, Mode::poincare, 1, 0.5, 100, 1e-8))) /
                             val(residual_no_bias(input(m, Mode::logsobolev, 1, 0.5, 100, 1e-8)));
  const double ratio_big = val(residual_no_bias(input(m, Mode::poincare, 1, 0.5, 100, 0.1))) /
                           val(residual_no_bias(input(m, Mode::logsobolev, 1, 0.5, 100, 0.1)));
  CHECK(ratio_small > ratio_big);
}

TEST_CASE("best_residual picks the right edge") {
  const ModelSpec m(SphericalCov{0.2}, Vector::Unit(5, 0), 0.0, LinkKind::logistic());
  const KConstants k = k_constants(m, KRequest{});
  const BoundReport r = best_residual(input(m, Mode::logsobolev, 1, 0.5, 200, 0.05, k));
  REQUIRE(r.best.has_value());
  CHECK(r.best->name == "no_bias");
  for (const BoundEntry& e : r.entries)
    if (e.result.applicable() && !e.informational) CHECK(r.best->residual.value <= e.result.residual->value);
  CHECK(r.rademacher_expectation_bound == doctest::Approx(2.0 * (1.0 + 0.5) / std::sqrt(200.0)));

  const ModelSpec far = one_d(0.0, 10.0);
  const BoundReport f = best_residual(input(far, Mode::logsobolev, 1, 0.5, 200, 0.1, k_constants(far, KRequest{})));
  for (Mode mode : {Mode::poincare, Mode::logsobolev})
    CHECK(f.find("large_bias", mode)->result.residual->value < f.find("small_bias", mode)->result.residual->value);

  const ModelSpec probit = one_d(1.0, 1.0, LinkKind::probit());
  const BoundReport p = best_residual(input(probit, Mode::logsobolev, 1, 0.5, 200, 0.1, k_constants(probit, KRequest{})));
  CHECK_FALSE(p.find("small_bias", Mode::poincare)->result.applicable());
  CHECK(p.find("small_bias", Mode::poincare)->result.reason.find("not Lipschitz") != std::string::npos);
  REQUIRE(p.best.has_value());
  CHECK(p.best->name == "generic");

  const BoundReport one = best_residual(input(m, Mode::logsobolev, 1, 0.5, 200, 1.0, k));
  CHECK(one.find("no_bias", Mode::logsobolev)->result.residual->value == 0.0);
}
