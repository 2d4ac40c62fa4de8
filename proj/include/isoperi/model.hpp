// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "isoperi/errors.hpp"

namespace isoperi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class LinkTag { logistic, probit };

/// Link function g with g(t) + g(-t) = 1.
struct LinkKind {
  LinkTag tag = LinkTag::logistic;

  /// Lipschitz constant G of log g. The probit link has none: log Phi is not
  /// globally Lipschitz.
  std::optional<double> lipschitz_of_log() const {
    if (tag == LinkTag::logistic) return 1.0;
    return std::nullopt;
  }
  static LinkKind logistic() { return {LinkTag::logistic}; }
  static LinkKind probit() { return {LinkTag::probit}; }
};

std::string to_string(LinkTag tag);
LinkTag parse_link(const std::string& name);

double normal_cdf(double t);
double normal_pdf(double t);
double link_value(const LinkKind& link, double t);
double link_derivative(const LinkKind& link, double t);
/// log g(t), accurate in the far left tail.
double log_link_value(const LinkKind& link, double t);

enum class LossTag { logistic_loss, hinge, custom };

struct LossSpec {
  LossTag tag = LossTag::logistic_loss;
  double lipschitz = 1.0;
  std::function<double(double)> value;
  std::function<double(double)> subgradient;

  static LossSpec logistic() { return {LossTag::logistic_loss, 1.0, {}, {}}; }
  static LossSpec hinge() { return {LossTag::hinge, 1.0, {}, {}}; }
  static LossSpec custom(std::function<double(double)> value,
                         std::function<double(double)> subgradient, double lipschitz);
};

std::string to_string(LossTag tag);
LossTag parse_loss(const std::string& name);

double loss_value(const LossSpec& loss, double t);
double loss_subgradient(const LossSpec& loss, double t);

struct ConstraintSet {
  double r_w = 1.0;
  double r_b = 0.0;

  void validate() const;
};

struct SphericalCov {
  double s = 1.0;
};
struct DiagonalCov {
  Vector diag;
};
struct FullCov {
  Matrix mat;
};
using CovarianceSpec = std::variant<SphericalCov, DiagonalCov, FullCov>;

/// Covariance with the structure kept, so spherical and diagonal models in
/// high dimension never materialize a d x d matrix.
class Covariance {
 public:
  Covariance() = default;
  Covariance(CovarianceSpec spec, int dim);

  const CovarianceSpec& spec() const { return spec_; }
  int dim() const { return dim_; }
  std::string kind() const;

  Vector apply(const Vector& v) const;
  double quad(const Vector& u, const Vector& v) const;
  double quad(const Vector& v) const { return quad(v, v); }
  /// Maps standard normal draws to N(0, Sigma) draws.
  Vector factor_apply(const Vector& eps) const;
  double lambda_max() const;
  double trace() const;
  Matrix dense() const;

 private:
  CovarianceSpec spec_;
  int dim_ = 0;
  Matrix chol_;
  double lambda_max_ = 0.0;
};

/// Gaussian inputs X ~ N(mu, Sigma) and labels with P(Y = y | X) =
/// g(y(<X, theta1> + theta0)).
class ModelSpec {
 public:
  ModelSpec(CovarianceSpec cov, Vector theta1, double theta0, Vector mu, LinkKind link);
  ModelSpec(CovarianceSpec cov, Vector theta1, double theta0, LinkKind link);

  int dim() const { return cov_.dim(); }
  const Covariance& covariance() const { return cov_; }
  const Vector& theta1() const { return theta1_; }
  double theta0() const { return theta0_; }
  const Vector& mu() const { return mu_; }
  const LinkKind& link() const { return link_; }
  bool central() const { return mu_.squaredNorm() == 0.0; }

  /// theta0 + <mu, theta1>, the bias seen by the centered input.
  double effective_bias() const { return theta0_ + mu_.dot(theta1_); }
  /// tr(E[X X^T]) = tr(Sigma) + |mu|^2.
  double trace_second_moment() const { return cov_.trace() + mu_.squaredNorm(); }

  ModelSpec with_theta0(double theta0) const;
  ModelSpec with_mu(Vector mu) const;

 private:
  Covariance cov_;
  Vector theta1_;
  double theta0_;
  Vector mu_;
  LinkKind link_;
};

struct Dataset {
  Matrix x;  // n x d
  Vector y;  // entries +-1
  std::uint64_t master_seed = 0;

  int n() const { return static_cast<int>(x.rows()); }
  int dim() const { return static_cast<int>(x.cols()); }
};

/// X_i ~ N(mu, Sigma); the label uses the shifted X_i directly. Rows are drawn
/// in order from one stream, so the first k rows do not depend on n.
Dataset sample_dataset(const ModelSpec& model, int n, std::uint64_t seed);

/// Pairs (Z_i, Y_i) with Z_i = Y_i X_i. Returned in Dataset form with x := Z.
Dataset to_label_weighted(const Dataset& data);

void write_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace isoperi
