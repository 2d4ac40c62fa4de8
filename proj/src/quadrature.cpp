// SPDX-License-Identifier: Apache-2.0
#include "isoperi/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "isoperi/errors.hpp"

namespace isoperi {

double QuadratureRule::apply(const std::function<double(double)>& f) const {
  double acc = 0.0;
  for (int i = 0; i < order; ++i) acc += weights[i] * f(nodes[i]);
  return acc;
}

namespace {

// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix. Weights come
// from the Christoffel function mu0 / sum_k p_k(x)^2 with orthonormal p_k,
// evaluated with running rescaling; this keeps full relative accuracy for
// the tiny weights at the outermost nodes, which eigenvector components
// would not.
QuadratureRule rule_from_jacobi(const std::vector<double>& alpha, const std::vector<double>& beta,
                                double mu0) {
  const int m = static_cast<int>(alpha.size());
  QuadratureRule rule;
  rule.order = m;
  if (m == 1) {
    rule.nodes = {alpha[0]};
    rule.weights = {mu0};
    return rule;
  }
  Eigen::VectorXd diag(m), sub(m - 1);
  for (int i = 0; i < m; ++i) diag[i] = alpha[i];
  for (int i = 0; i < m - 1; ++i) sub[i] = beta[i];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("Golub-Welsch eigen-solve failed");
  rule.nodes.assign(eig.eigenvalues().data(), eig.eigenvalues().data() + m);
  rule.weights.resize(m);
  for (int i = 0; i < m; ++i) {
    const double x = rule.nodes[i];
    double p_prev = 0.0, p = 1.0, sum = 1.0, log_scale = 0.0;
    for (int k = 0; k + 1 < m; ++k) {
      const double b_prev = k > 0 ? beta[k - 1] : 0.0;
      const double p_next = ((x - alpha[k]) * p - b_prev * p_prev) / beta[k];
      p_prev = p;
      p = p_next;
      sum += p * p;
      if (sum > 1e200) {
        p *= 1e-100;
        p_prev *= 1e-100;
        sum *= 1e-200;
        log_scale += 200.0 * std::numbers::ln10;
      }
    }
    rule.weights[i] = mu0 * std::exp(-std::log(sum) - log_scale);
  }
  return rule;
}

void symmetrize(QuadratureRule& rule) {
  const int m = rule.order;
  for (int i = 0; i < m / 2; ++i) {
    const int j = m - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (m % 2 == 1) rule.nodes[m / 2] = 0.0;
}

void normalize(QuadratureRule& rule, double mass) {
  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w *= mass / total;
}

void check_order(int order, int max_order, const char* name) {
  if (order < 1 || order > max_order)
    throw ConfigError(std::string(name) + " order must lie in [1, " + std::to_string(max_order) + "]");
}

}  // namespace

QuadratureRule gauss_hermite(int order) {
  check_order(order, 500, "Gauss-Hermite");
  std::vector<double> alpha(order, 0.0), beta(order > 1 ? order - 1 : 0);
  for (int k = 1; k < order; ++k) beta[k - 1] = std::sqrt(static_cast<double>(k));
  QuadratureRule rule = rule_from_jacobi(alpha, beta, 1.0);
  symmetrize(rule);
  normalize(rule, 1.0);
  return rule;
}

QuadratureRule gauss_laguerre(int order) {
  check_order(order, 500, "Gauss-Laguerre");
  std::vector<double> alpha(order), beta(order > 1 ? order - 1 : 0);
  for (int k = 0; k < order; ++k) alpha[k] = 2.0 * k + 1.0;
  for (int k = 1; k < order; ++k) beta[k - 1] = static_cast<double>(k);
  QuadratureRule rule = rule_from_jacobi(alpha, beta, 1.0);
  normalize(rule, 1.0);
  return rule;
}

QuadratureRule gauss_legendre(int order) {
  check_order(order, 500, "Gauss-Legendre");
  std::vector<double> alpha(order, 0.0), beta(order > 1 ? order - 1 : 0);
  for (int k = 1; k < order; ++k) beta[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  QuadratureRule rule = rule_from_jacobi(alpha, beta, 2.0);
  symmetrize(rule);
  normalize(rule, 2.0);
  return rule;
}

QuadratureRule half_range_hermite(int order) {
  check_order(order, 320, "half-range Hermite");
  // Discretize phi on [0, 48] by composite Gauss-Legendre: 192 panels of
  // 24 points. The largest node of the order-320 rule sits near 36, and
  // phi(48) underflows, so nothing beyond is lost.
  const QuadratureRule gl = gauss_legendre(24);
  const int panels = 192;
  const double width = 48.0 / panels;
  std::vector<double> x, w;
  x.reserve(panels * gl.order);
  w.reserve(panels * gl.order);
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * width;
    for (int i = 0; i < gl.order; ++i) {
      const double xi = mid + 0.5 * width * gl.nodes[i];
      x.push_back(xi);
      w.push_back(0.5 * width * gl.weights[i] * std::exp(-0.5 * xi * xi) / std::sqrt(2.0 * std::numbers::pi));
    }
  }
  const std::size_t n = x.size();
  // Stieltjes procedure on orthonormal vectors q_k (values at the grid).
  std::vector<double> q_prev(n, 0.0), q(n), r(n);
  double mass = 0.0;
  for (double wi : w) mass += wi;
  for (std::size_t j = 0; j < n; ++j) q[j] = 1.0 / std::sqrt(mass);
  std::vector<double> alpha(order), beta(order > 1 ? order - 1 : 0);
  double b_prev = 0.0;
  for (int k = 0; k < order; ++k) {
    double a = 0.0;
    for (std::size_t j = 0; j < n; ++j) a += w[j] * x[j] * q[j] * q[j];
    alpha[k] = a;
    if (k + 1 == order) break;
    double norm2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      r[j] = (x[j] - a) * q[j] - b_prev * q_prev[j];
      norm2 += w[j] * r[j] * r[j];
    }
    const double b = std::sqrt(norm2);
    beta[k] = b;
    for (std::size_t j = 0; j < n; ++j) {
      q_prev[j] = q[j];
      q[j] = r[j] / b;
    }
    b_prev = b;
  }
  QuadratureRule rule = rule_from_jacobi(alpha, beta, 0.5);
  normalize(rule, 0.5);
  return rule;
}

namespace {

template <QuadratureRule (*Build)(int)>
const QuadratureRule& cached(int order) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, std::make_unique<QuadratureRule>(Build(order))).first;
  return *it->second;
}

void check_agreement(double coarse, double fine, double magnitude, double rel_tol, const std::string& what) {
  if (!std::isfinite(coarse) || !std::isfinite(fine))
    throw NumericalError(what + ": integrand is not finite on the quadrature grid");
  if (std::abs(coarse - fine) > rel_tol * std::max(magnitude, 1e-300))
    throw NumericalError(what + ": quadrature did not converge (" + std::to_string(coarse) + " vs " +
                         std::to_string(fine) + ")");
}

// Composite 16-point Gauss-Legendre over [-half_width, half_width] against
// the N(0, sd^2) density.
double composite_normal(const std::function<double(double)>& f, double sd, double half_width, double panel,
                        double* magnitude) {
  const QuadratureRule& gl = *[] {
    static const QuadratureRule rule = gauss_legendre(16);
    return &rule;
  }();
  const long panels = static_cast<long>(std::ceil(2.0 * half_width / panel));
  const double width = 2.0 * half_width / panels;
  const double norm = 1.0 / (sd * std::sqrt(2.0 * std::numbers::pi));
  double acc = 0.0, mag = 0.0;
  for (long p = 0; p < panels; ++p) {
    const double mid = -half_width + (p + 0.5) * width;
    for (int i = 0; i < gl.order; ++i) {
      const double t = mid + 0.5 * width * gl.nodes[i];
      const double z = t / sd;
      const double wt = 0.5 * width * gl.weights[i] * norm * std::exp(-0.5 * z * z);
      const double v = f(t);
      acc += wt * v;
      mag += wt * std::abs(v);
    }
  }
  if (magnitude) *magnitude = mag;
  return acc;
}

}  // namespace

const QuadratureRule& cached_gauss_hermite(int order) { return cached<gauss_hermite>(order); }
const QuadratureRule& cached_half_range_hermite(int order) { return cached<half_range_hermite>(order); }
const QuadratureRule& cached_gauss_laguerre(int order) { return cached<gauss_laguerre>(order); }

double expect_normal(const std::function<double(double)>& f, double sd, const ExpectationOptions& opt,
                     const std::string& what) {
  if (sd < 0.0 || !std::isfinite(sd)) throw ConfigError(what + ": standard deviation must be finite and >= 0");
  if (sd == 0.0) {
    const double v = f(0.0);
    if (!std::isfinite(v)) throw NumericalError(what + ": integrand is not finite at the point mass");
    return v;
  }
  if (sd <= 4.0) {
    const QuadratureRule& coarse = cached_gauss_hermite(opt.order);
    const QuadratureRule& fine = cached_gauss_hermite(std::min(2 * opt.order, 500));
    const double a = coarse.apply([&](double x) { return f(sd * x); });
    double b = 0.0, mag = 0.0;
    for (int i = 0; i < fine.order; ++i) {
      const double v = f(sd * fine.nodes[i]);
      b += fine.weights[i] * v;
      mag += fine.weights[i] * std::abs(v);
    }
    check_agreement(a, b, mag, opt.rel_tol, what);
    return b;
  }
  // Hermite nodes are spaced ~sd apart here, too coarse for the unit-scale
  // transition of a link function. Integrate in t on panels instead; the
  // window also covers integrands growing like e^{|t|}, whose mass sits
  // near |t| = sd^2.
  const double half_width = sd * (14.0 + sd);
  double mag = 0.0;
  const double a = composite_normal(f, sd, half_width, 0.5, nullptr);
  const double b = composite_normal(f, sd, half_width, 0.25, &mag);
  check_agreement(a, b, mag, opt.rel_tol, what);
  return b;
}

double log_half_line_tilt(double a, const ExpectationOptions& opt) {
  const std::string what = "half-line Gaussian integral";
  if (a == 0.0) return std::log(0.5);
  if (a > 4.0) {
    // H(a) + H(-a) = E e^{aX} = e^{a^2/2}, and H(-a) is the stable side.
    const double log_other = log_half_line_tilt(-a, opt);
    return 0.5 * a * a + std::log1p(-std::exp(log_other - 0.5 * a * a));
  }
  const int m1 = std::min(opt.order, 160);
  const int m2 = std::min(2 * m1, 320);
  if (a >= -4.0) {
    const QuadratureRule& r1 = cached_half_range_hermite(m1);
    const QuadratureRule& r2 = cached_half_range_hermite(m2);
    const double v1 = r1.apply([a](double x) { return std::exp(a * x); });
    const double v2 = r2.apply([a](double x) { return std::exp(a * x); });
    check_agreement(v1, v2, v2, opt.rel_tol, what);
    return std::log(v2);
  }
  // Steep decay: x = u / |a| turns the integral into a Laguerre one,
  // (1/|a|) int_0^inf e^{-u} phi(u/|a|) du.
  const double s = -a;
  const auto g = [s](double u) { return std::exp(-0.5 * (u / s) * (u / s)); };
  const double v1 = cached_gauss_laguerre(m1).apply(g);
  const double v2 = cached_gauss_laguerre(m2).apply(g);
  check_agreement(v1, v2, v2, opt.rel_tol, what);
  return std::log(v2) - std::log(s) - 0.5 * std::log(2.0 * std::numbers::pi);
}

}  // namespace isoperi
