// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "isoperi/analytics.hpp"
#include "isoperi/model.hpp"

namespace isoperi {

enum class Mode { poincare, logsobolev };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);

struct BoundInput {
  ModelSpec model;
  ConstraintSet constraints;
  double loss_lipschitz = 1.0;
  int n = 1;
  double delta = 0.1;
  KConstants kconst;
  Mode mode = Mode::logsobolev;
  /// Only the informational bounded-differences entry reads the loss itself.
  std::optional<LossSpec> loss;

  void validate() const;
  BoundInput with_mode(Mode m) const;
  BoundInput with_delta(double d) const;
};

/// A residual kept in log space so that e^{2G|theta0|}-sized factors stay
/// usable; value may be +inf while log_value is finite.
struct Residual {
  double value = 0.0;
  double log_value = -std::numeric_limits<double>::infinity();

  static Residual from_log(double log_value);
};

/// Either a residual or the reason it does not apply.
struct ResidualResult {
  std::optional<Residual> residual;
  std::string reason;
  /// Conjugate exponent used by the generic route (+inf encodes c = inf).
  std::optional<double> c;

  bool applicable() const { return residual.has_value(); }
  static ResidualResult inapplicable(std::string why) { return {std::nullopt, std::move(why), std::nullopt}; }
};

/// Scalar functionals of the model that the residuals consume, in log form.
struct ScalarFunctionals {
  double theta0_eff = 0.0;
  double signal_variance = 0.0;
  double log_mgf_theta1 = 0.0;              // log M_X(theta1)
  std::optional<double> log_mgf_num_g;      // log M^num(G theta1)
  std::optional<double> log_mgf_num_2g;     // log M^num(2G theta1)
  std::optional<double> log_mgf_den_g;      // log M^den(G theta1)
  double log_tilde_m_inverse = 0.0;         // log 1/M~(theta1)
  double p_exceed = 0.5;
  double log_p_exceed = std::log(0.5);
};

ScalarFunctionals scalar_functionals(const ModelSpec& model, const ExpectationOptions& opt = {});

double rademacher_bound(double L, double r_w, double r_b, double trace_second_moment, int n);

ResidualResult residual_no_bias(const BoundInput& in);
ResidualResult residual_small_bias(const BoundInput& in);
ResidualResult residual_large_bias(const BoundInput& in);
ResidualResult residual_weak_signal(const BoundInput& in);
ResidualResult residual_strong_signal(const BoundInput& in);
ResidualResult residual_noncentral(const BoundInput& in);

ResidualResult residual_small_bias(const BoundInput& in, const ScalarFunctionals& f);
ResidualResult residual_large_bias(const BoundInput& in, const ScalarFunctionals& f);
ResidualResult residual_weak_signal(const BoundInput& in, const ScalarFunctionals& f);
ResidualResult residual_strong_signal(const BoundInput& in, const ScalarFunctionals& f);
ResidualResult residual_noncentral(const BoundInput& in, const ScalarFunctionals& f);

/// Residual from the weighted Poincare / log-Sobolev operators with
/// per-sample caps Gamma_Z <= L^2 R_w^2 / n^2 and Gamma_Y <= L^2 R_b^2 / n^2.
/// c = +inf selects c* = 1 (requires K_chi2 = 0 for a finite value).
Residual residual_theorem1_generic(const KConstants& k, double c, double L, double r_w, double r_b, int n,
                                   double delta, Mode mode);

/// The c-grid {1 + 2^k : k = -10..10} U {2} U {inf when K_chi2 = 0}.
std::vector<double> generic_c_grid(const KConstants& k);

/// Minimum of the generic residual over generic_c_grid; R_b is widened to
/// R_b + |mu| R_w for noncentral inputs.
ResidualResult residual_generic_best(const BoundInput& in);

struct BoundEntry {
  std::string name;
  Mode mode = Mode::poincare;
  ResidualResult result;
  /// Informational entries never compete for `best`.
  bool informational = false;
};

struct BestEntry {
  std::string name;
  Mode mode = Mode::poincare;
  Residual residual;
};

struct BoundReport {
  BoundInput input;
  std::vector<BoundEntry> entries;
  double rademacher_expectation_bound = 0.0;
  std::optional<BestEntry> best;
  std::string best_reason;
  ScalarFunctionals functionals;
  std::vector<std::string> warnings;

  const BoundEntry* find(const std::string& name, Mode mode) const;
};

/// Evaluates every residual in both modes and picks the smallest finite one.
BoundReport best_residual(const BoundInput& in, const ExpectationOptions& opt = {});

/// The entry names in report order.
const std::vector<std::string>& residual_names();

}  // namespace isoperi
