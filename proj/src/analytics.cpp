// SPDX-License-Identifier: Apache-2.0
#include "isoperi/analytics.hpp"

#include <cmath>
#include <limits>
#include <tuple>
#include <utility>

namespace isoperi {

double signal_variance(const ModelSpec& model) { return model.covariance().quad(model.theta1()); }

double log_mgf(const ModelSpec& model, const Vector& t) {
  if (t.size() != model.dim()) throw ConfigError("mgf argument has wrong length");
  return 0.5 * model.covariance().quad(t);
}

double mgf(const ModelSpec& model, const Vector& t) {
  const double lg = log_mgf(model, t);
  if (lg > 700.0)
    throw NumericalError("mgf overflows: <t, Sigma t>/2 = " + std::to_string(lg) + " > 700; use log_mgf");
  return std::exp(lg);
}

// With T = s X, X ~ N(0,1):
//   E e^{max(0,T)} = 1/2 + int_0^inf e^{s x} phi(x) dx = 1/2 + H(s),
//   E e^{min(0,T)} = 1/2 + H(-s),
//   E e^{-|T|}     = 2 H(-s).
double log_mgf_num(const ModelSpec& model, double scale, const ExpectationOptions& opt) {
  const double s = std::abs(scale) * std::sqrt(signal_variance(model));
  if (s == 0.0) return 0.0;
  const double lh = log_half_line_tilt(s, opt);
  // log(1/2 + H) with H >= 1/2.
  return lh + std::log1p(0.5 * std::exp(-lh));
}

double log_mgf_den(const ModelSpec& model, double scale, const ExpectationOptions& opt) {
  const double s = std::abs(scale) * std::sqrt(signal_variance(model));
  if (s == 0.0) return 0.0;
  return std::log(0.5 + std::exp(log_half_line_tilt(-s, opt)));
}

double mgf_num(const ModelSpec& model, double scale, const ExpectationOptions& opt) {
  const double lg = log_mgf_num(model, scale, opt);
  if (lg > 700.0) throw NumericalError("mgf_num overflows; use log_mgf_num");
  return std::exp(lg);
}

double mgf_den(const ModelSpec& model, double scale, const ExpectationOptions& opt) {
  return std::exp(log_mgf_den(model, scale, opt));
}

double log_tilde_m_inverse(const ModelSpec& model, const ExpectationOptions& opt) {
  const double s = std::sqrt(signal_variance(model));
  if (s == 0.0) return 0.0;
  return std::log(2.0) + log_half_line_tilt(-s, opt);
}

double tilde_m_inverse(const ModelSpec& model, const ExpectationOptions& opt) {
  return std::exp(log_tilde_m_inverse(model, opt));
}

double p_exceed(const ModelSpec& model) {
  const double s = std::sqrt(signal_variance(model));
  const double b = std::abs(model.effective_bias());
  if (s == 0.0) return b == 0.0 ? 0.5 : 0.0;
  return normal_cdf(-b / s);
}

namespace {

// (p_Y(+1), p_Y(-1)). The smaller one is integrated directly so that it keeps
// its relative accuracy when the bias is huge.
std::pair<double, double> label_probs(const ModelSpec& model, const ExpectationOptions& opt) {
  const double b = model.effective_bias();
  const double s = std::sqrt(signal_variance(model));
  if (b == 0.0) return {0.5, 0.5};
  const LinkKind link = model.link();
  const double sign = b > 0.0 ? -1.0 : 1.0;
  const double small = expect_normal([&](double t) { return link_value(link, sign * (t + b)); }, s, opt,
                                     "label_prob");
  return b > 0.0 ? std::pair{1.0 - small, small} : std::pair{small, 1.0 - small};
}

}  // namespace

double label_prob(const ModelSpec& model, const ExpectationOptions& opt) { return label_probs(model, opt).first; }

double chi2_conditional(const ModelSpec& model, int y, const ExpectationOptions& opt) {
  if (y != 1 && y != -1) throw ConfigError("chi2_conditional: y must be +1 or -1");
  const double b = model.effective_bias();
  const double s = std::sqrt(signal_variance(model));
  const LinkKind link = model.link();
  const auto [p_plus, p_minus] = label_probs(model, opt);
  const double p_y = y == 1 ? p_plus : p_minus;
  const auto integrand = [&](double t) {
    const double total = link_value(link, t + b) + link_value(link, t - b);
    return std::exp(2.0 * std::log(total) - log_link_value(link, t + y * b));
  };
  double e = 0.0;
  try {
    e = expect_normal(integrand, s, opt, "chi2_conditional");
  } catch (const NumericalError& err) {
    if (link.tag == LinkTag::probit)
      throw NumericalError(std::string("chi2_conditional: clipped domain for probit link (1/Phi grows like "
                                       "e^{t^2/2}; the integral diverges once s >= 1): ") + err.what());
    throw;
  }
  const double chi2 = p_y * e - 1.0;
  if (chi2 < -1e-9) throw NumericalError("chi2_conditional: negative divergence " + std::to_string(chi2));
  return std::max(chi2, 0.0);
}

std::string to_string(KStrategy s) {
  switch (s) {
    case KStrategy::bakry_emery: return "bakry_emery";
    case KStrategy::kls_sqrt_log: return "kls_sqrt_log";
    case KStrategy::kls_trace: return "kls_trace";
    case KStrategy::user_override: return "user_override";
  }
  return "user_override";
}

KStrategy parse_strategy(const std::string& name) {
  if (name == "bakry_emery") return KStrategy::bakry_emery;
  if (name == "kls_sqrt_log") return KStrategy::kls_sqrt_log;
  if (name == "kls_trace") return KStrategy::kls_trace;
  if (name == "user_override") return KStrategy::user_override;
  throw ConfigError("unknown K strategy '" + name + "'");
}

double second_moment_lambda_max(const ModelSpec& model) {
  const Vector& mu = model.mu();
  const Covariance& cov = model.covariance();
  const double mu2 = mu.squaredNorm();
  if (mu2 == 0.0) return cov.lambda_max();
  if (auto* sph = std::get_if<SphericalCov>(&cov.spec())) return sph->s + mu2;
  if (auto* dg = std::get_if<DiagonalCov>(&cov.spec())) {
    // Largest root of the secular equation sum_i mu_i^2 / (lambda - d_i) = 1,
    // bracketed by [max d, max d + |mu|^2].
    const double top = dg->diag.maxCoeff();
    double lo = top, hi = top + mu2;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      double f = -1.0;
      for (int i = 0; i < mu.size(); ++i) f += mu[i] * mu[i] / (mid - dg->diag[i]);
      (f > 0.0 ? lo : hi) = mid;
    }
    return hi;
  }
  const Matrix m = cov.dense() + mu * mu.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

double second_moment_frobenius(const ModelSpec& model) {
  const Covariance& cov = model.covariance();
  double sigma_f2 = 0.0;
  if (auto* sph = std::get_if<SphericalCov>(&cov.spec())) sigma_f2 = sph->s * sph->s * cov.dim();
  else if (auto* dg = std::get_if<DiagonalCov>(&cov.spec())) sigma_f2 = dg->diag.squaredNorm();
  else sigma_f2 = std::get<FullCov>(cov.spec()).mat.squaredNorm();
  const double mu2 = model.mu().squaredNorm();
  return std::sqrt(sigma_f2 + 2.0 * cov.quad(model.mu()) + mu2 * mu2);
}

KConstants k_constants(const ModelSpec& model, const KRequest& req, const ExpectationOptions& opt) {
  KConstants k;
  k.strategy_p = req.strategy_p;
  k.strategy_ls = req.strategy_ls;
  k.c_kls_user = req.c_kls_user;
  const bool kls = req.strategy_p == KStrategy::kls_sqrt_log || req.strategy_p == KStrategy::kls_trace;
  if (kls && !req.c_kls_user)
    throw ConfigError("KLS strategy for K_P needs c_kls_user (the absolute constant is not fixed)");
  if (req.c_kls_user && !(*req.c_kls_user > 0.0)) throw ConfigError("c_kls_user must be positive");

  // The conditional potential of Z given Y is U(z) - log g(<z,theta1> + y theta0):
  // Sigma^{-1}-convex plus a convex term, hence lambda_max(Sigma) for both.
  switch (req.strategy_p) {
    case KStrategy::bakry_emery: k.k_p = model.covariance().lambda_max(); break;
    case KStrategy::kls_sqrt_log: {
      // max(1, log d) keeps K_P positive at d = 1, where log d vanishes.
      const double logd = std::max(1.0, std::log(static_cast<double>(model.dim())));
      k.k_p = *req.c_kls_user * std::sqrt(logd) * second_moment_lambda_max(model);
      break;
    }
    case KStrategy::kls_trace: k.k_p = *req.c_kls_user * second_moment_frobenius(model); break;
    case KStrategy::user_override:
      if (!req.k_p_override || !(*req.k_p_override > 0.0))
        throw ConfigError("user_override for K_P needs a positive k_p value");
      k.k_p = *req.k_p_override;
      break;
  }
  switch (req.strategy_ls) {
    case KStrategy::bakry_emery: k.k_ls = model.covariance().lambda_max(); break;
    case KStrategy::user_override:
      if (!req.k_ls_override || !(*req.k_ls_override > 0.0))
        throw ConfigError("user_override for K_LS needs a positive k_ls value");
      k.k_ls = *req.k_ls_override;
      break;
    default: throw ConfigError("K_LS supports bakry_emery or user_override; KLS bounds give Poincare constants only");
  }

  std::tie(k.p_plus, k.p_minus) = label_probs(model, opt);
  if (!(k.p_plus > 0.0 && k.p_minus > 0.0))
    throw NumericalError("label probability underflows (p_plus = " + std::to_string(k.p_plus) +
                         ", p_minus = " + std::to_string(k.p_minus) + ")");
  k.k_v = 4.0 * k.p_plus * k.p_minus;
  k.k_u = std::max(1.0 / k.p_plus, 1.0 / k.p_minus);
  try {
    k.k_chi2 = std::max(chi2_conditional(model, 1, opt), chi2_conditional(model, -1, opt));
  } catch (const NumericalError& err) {
    k.k_chi2 = std::numeric_limits<double>::infinity();
    k.notes.push_back(std::string("K_chi2 treated as +inf: ") + err.what());
  }
  if (!model.central()) k.notes.push_back("noncentral input: K_chi2, K_V, K_U use the centered law with the effective bias");
  return k;
}

}  // namespace isoperi
