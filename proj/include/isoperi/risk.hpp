// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isoperi/model.hpp"
#include "isoperi/quadrature.hpp"

namespace isoperi {

struct OptimizerConfig {
  int restarts = 24;
  int max_iters = 400;
  double step_init = 0.5;
  double step_decay = 0.97;
  double tol = 1e-7;
  int quad_order_2d = 60;
  /// Derivative-free compass polish of the best point (only for d <= 10).
  bool polish = true;
  /// Random points scored up front; the best fill the non-structured starts.
  int screen_points = 512;
  /// Random feasible points checked against the result after the search.
  int audit_points = 0;
  /// Maximize R_n - R instead of R - R_n.
  bool negate = false;
  /// Optional CSV dump of every accepted step: start,iter,F,step,norm_w.
  std::string trace_path;

  void validate() const;
};

struct SupResult {
  double value = 0.0;
  Vector argmax_w;
  double argmax_b = 0.0;
  int starts_used = 0;
  bool converged = true;
  /// Audit points that beat the search (the result is then replaced).
  int audit_violations = 0;
};

/// R(w, b) = E l(Y(<X,w> + b)) through the law of (S, T) = (<X,w>, <X,theta1>).
///
/// Logistic loss uses l(-s) = l(s) + s, so that
///   R = E l(S + b) + (E S + b) P_minus - Cov(S,T) D,
/// with P_minus = E g(-T - theta0) and D = E g'(T + theta0) fixed per model
/// (the last term is Stein's identity for the jointly Gaussian pair). That
/// leaves one Gauss-Hermite sum over S. Hinge loss integrates T by
/// Gauss-Hermite and S | T in closed form, E max(0, M + tau V) =
/// M Phi(M/tau) + tau phi(M/tau). Any other loss takes the tensorized 2-D
/// rule over the whitened pair.
class PopulationRisk {
 public:
  PopulationRisk(const ModelSpec& model, const LossSpec& loss, int quad_order = 60);

  double value(const Vector& w, double b) const;
  double value_and_gradient(const Vector& w, double b, Vector& grad_w, double& grad_b) const;

  /// The tensorized 2-D route regardless of loss; used to cross-check the
  /// specialized reductions.
  double value_generic(const Vector& w, double b) const;
  double value_and_gradient_generic(const Vector& w, double b, Vector& grad_w, double& grad_b) const;

  const ModelSpec& model() const { return model_; }

 private:
  struct Moments {
    double m_s, q, c;
    Vector sigma_w;
  };
  Moments moments(const Vector& w) const;
  double logistic_path(const Vector& w, double b, Vector* grad_w, double* grad_b) const;
  double hinge_path(const Vector& w, double b, Vector* grad_w, double* grad_b) const;
  double generic_path(const Vector& w, double b, Vector* grad_w, double* grad_b) const;

  ModelSpec model_;
  LossSpec loss_;
  const QuadratureRule* rule_;
  double m_t_, v_t_, sd_t_;
  Vector sigma_theta_;
  double p_minus_ = 0.0, d_ = 0.0;
  std::vector<double> g_plus_, g_minus_;  // link at the T nodes
};

class EmpiricalRisk {
 public:
  EmpiricalRisk(const Dataset& data, const LossSpec& loss);

  double value(const Vector& w, double b) const;
  double value_and_gradient(const Vector& w, double b, Vector& grad_w, double& grad_b) const;

 private:
  Matrix z_;
  Vector y_;
  LossSpec loss_;
};

double empirical_risk(const Dataset& data, const LossSpec& loss, const Vector& w, double b);
double population_risk(const ModelSpec& model, const LossSpec& loss, const Vector& w, double b, int quad_order = 60);
double gap(const Dataset& data, const ModelSpec& model, const LossSpec& loss, const Vector& w, double b);

SupResult sup_gap(const Dataset& data, const ModelSpec& model, const LossSpec& loss,
                  const ConstraintSet& constraints, const OptimizerConfig& cfg, std::uint64_t seed);

/// Exhaustive grid (line for d = 1, polar for d = 2, filtered cube for
/// d = 3) times a grid on [-R_b, R_b], then local zoom refinement around the
/// best grid cells. d <= 3, resolution <= 201.
double grid_oracle_sup(const Dataset& data, const ModelSpec& model, const LossSpec& loss,
                       const ConstraintSet& constraints, int resolution, bool negate = false);

/// Max relative error between the analytic population-risk gradient and
/// central differences with h = 1e-5.
double gradient_check(const ModelSpec& model, const LossSpec& loss, const Vector& w, double b, int quad_order = 60);

}  // namespace isoperi
