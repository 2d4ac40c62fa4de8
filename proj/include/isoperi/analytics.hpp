// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "isoperi/model.hpp"
#include "isoperi/quadrature.hpp"

namespace isoperi {

// Every functional below is an expectation of a function of z that depends
// on z only through T = <z, theta1>. For the centered Gaussian input T ~
// N(0, s^2) with s^2 = <theta1, Sigma theta1>, so each reduces to a 1-D
// integral. For mu != 0 the functionals describe the centered input with the
// effective bias theta0 + <mu, theta1>.

double signal_variance(const ModelSpec& model);

/// E exp(<X - mu, t>) = exp(<t, Sigma t>/2). Throws NumericalError once the
/// exponent exceeds 700; use log_mgf then.
double mgf(const ModelSpec& model, const Vector& t);
double log_mgf(const ModelSpec& model, const Vector& t);

/// E exp(max(0, T)) and E exp(min(0, T)) with T ~ N(0, scale^2 s^2).
double mgf_num(const ModelSpec& model, double scale, const ExpectationOptions& opt = {});
double mgf_den(const ModelSpec& model, double scale, const ExpectationOptions& opt = {});
double log_mgf_num(const ModelSpec& model, double scale, const ExpectationOptions& opt = {});
double log_mgf_den(const ModelSpec& model, double scale, const ExpectationOptions& opt = {});

/// E exp(-|T|) with T ~ N(0, s^2).
double tilde_m_inverse(const ModelSpec& model, const ExpectationOptions& opt = {});
double log_tilde_m_inverse(const ModelSpec& model, const ExpectationOptions& opt = {});

/// P(T >= |theta0|); 1/2 at the corner s = 0, theta0 = 0.
double p_exceed(const ModelSpec& model);

/// p_Y(+1) = E g(T + theta0).
double label_prob(const ModelSpec& model, const ExpectationOptions& opt = {});

/// chi^2(P_Z || P_{Z|Y=y}). With p_X even, the joint density of (Z, Y) is
/// p_X(z) g(<z,theta1> + y theta0), hence
///   p_Z(z)       = p_X(z) sum_{y'} g(<z,theta1> + y' theta0),
///   p_{Z|y}(z)   = p_X(z) g(<z,theta1> + y theta0) / p_Y(y),
/// and chi^2 + 1 = int p_Z^2 / p_{Z|y} = p_Y(y) E[(sum_{y'} g(T + y' theta0))^2 / g(T + y theta0)].
double chi2_conditional(const ModelSpec& model, int y, const ExpectationOptions& opt = {});

enum class KStrategy { bakry_emery, kls_sqrt_log, kls_trace, user_override };

std::string to_string(KStrategy s);
KStrategy parse_strategy(const std::string& name);

struct KConstants {
  double k_p = 0.0;
  double k_ls = 0.0;
  double k_chi2 = 0.0;
  double k_v = 0.0;
  double k_u = 0.0;
  double p_plus = 0.5;
  /// p_Y(-1), integrated directly rather than as 1 - p_plus.
  double p_minus = 0.5;
  KStrategy strategy_p = KStrategy::bakry_emery;
  KStrategy strategy_ls = KStrategy::bakry_emery;
  std::optional<double> c_kls_user;
  /// Human-readable provenance warnings (defaulted constants, infinities).
  std::vector<std::string> notes;
};

struct KRequest {
  KStrategy strategy_p = KStrategy::bakry_emery;
  KStrategy strategy_ls = KStrategy::bakry_emery;
  std::optional<double> c_kls_user;
  std::optional<double> k_p_override;
  std::optional<double> k_ls_override;
};

KConstants k_constants(const ModelSpec& model, const KRequest& request, const ExpectationOptions& opt = {});

/// Largest eigenvalue and Frobenius norm of E[X X^T] = Sigma + mu mu^T.
double second_moment_lambda_max(const ModelSpec& model);
double second_moment_frobenius(const ModelSpec& model);

}  // namespace isoperi
