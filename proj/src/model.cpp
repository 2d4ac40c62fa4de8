// SPDX-License-Identifier: Apache-2.0
#include "isoperi/model.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "isoperi/rng.hpp"

namespace isoperi {

std::string to_string(LinkTag tag) { return tag == LinkTag::logistic ? "logistic" : "probit"; }

LinkTag parse_link(const std::string& name) {
  if (name == "logistic") return LinkTag::logistic;
  if (name == "probit") return LinkTag::probit;
  throw ConfigError("unknown link '" + name + "' (expected logistic|probit)");
}

double normal_cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

double normal_pdf(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); }

namespace {

// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

double link_value(const LinkKind& link, double t) {
  return link.tag == LinkTag::logistic ? logistic(t) : normal_cdf(t);
}

double link_derivative(const LinkKind& link, double t) {
  if (link.tag == LinkTag::logistic) {
    const double s = logistic(t);
    return s * logistic(-t);
  }
  return normal_pdf(t);
}

double log_link_value(const LinkKind& link, double t) {
  if (link.tag == LinkTag::logistic) return -softplus(-t);
  if (t > -30.0) return std::log(normal_cdf(t));
  // Mills-ratio asymptotics once erfc underflows.
  const double t2 = t * t;
  return -0.5 * t2 - std::log(-t) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p(-1.0 / t2 + 3.0 / (t2 * t2) - 15.0 / (t2 * t2 * t2));
}

LossSpec LossSpec::custom(std::function<double(double)> value,
                          std::function<double(double)> subgradient, double lipschitz) {
  if (!value || !subgradient) throw ConfigError("custom loss needs value and subgradient");
  if (!(lipschitz > 0.0)) throw ConfigError("loss Lipschitz constant must be positive");
  return {LossTag::custom, lipschitz, std::move(value), std::move(subgradient)};
}

std::string to_string(LossTag tag) {
  switch (tag) {
    case LossTag::logistic_loss: return "logistic";
    case LossTag::hinge: return "hinge";
    case LossTag::custom: return "custom";
  }
  return "custom";
}

LossTag parse_loss(const std::string& name) {
  if (name == "logistic" || name == "logistic_loss") return LossTag::logistic_loss;
  if (name == "hinge") return LossTag::hinge;
  throw ConfigError("unknown loss '" + name + "' (expected logistic|hinge)");
}

double loss_value(const LossSpec& loss, double t) {
  switch (loss.tag) {
    case LossTag::logistic_loss: return softplus(-t);
    case LossTag::hinge: return t < 1.0 ? 1.0 - t : 0.0;
    case LossTag::custom: return loss.value(t);
  }
  return 0.0;
}

double loss_subgradient(const LossSpec& loss, double t) {
  switch (loss.tag) {
    case LossTag::logistic_loss: return -logistic(-t);
    case LossTag::hinge: return t < 1.0 ? -1.0 : 0.0;
    case LossTag::custom: return loss.subgradient(t);
  }
  return 0.0;
}

void ConstraintSet::validate() const {
  if (!(r_w >= 0.0) || !std::isfinite(r_w)) throw ConfigError("r_w must be a finite nonnegative number");
  if (!(r_b >= 0.0) || !std::isfinite(r_b)) throw ConfigError("r_b must be a finite nonnegative number");
}

Covariance::Covariance(CovarianceSpec spec, int dim) : spec_(std::move(spec)), dim_(dim) {
  if (dim < 1) throw ConfigError("dimension must be positive");
  if (auto* sph = std::get_if<SphericalCov>(&spec_)) {
    if (!(sph->s > 0.0) || !std::isfinite(sph->s)) throw ConfigError("spherical covariance scale must be positive");
    lambda_max_ = sph->s;
  } else if (auto* dg = std::get_if<DiagonalCov>(&spec_)) {
    if (dg->diag.size() != dim) throw ConfigError("diagonal covariance has wrong length");
    for (double v : dg->diag)
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("diagonal covariance entries must be positive");
    lambda_max_ = dg->diag.maxCoeff();
  } else {
    const Matrix& m = std::get<FullCov>(spec_).mat;
    if (m.rows() != dim || m.cols() != dim) throw ConfigError("full covariance has wrong shape");
    if (!m.allFinite()) throw ConfigError("full covariance has non-finite entries");
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff()))
      throw ConfigError("full covariance is not symmetric");
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) throw ConfigError("full covariance is not positive definite (Cholesky failed)");
    chol_ = llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
    lambda_max_ = eig.eigenvalues().maxCoeff();
  }
}

std::string Covariance::kind() const {
  if (std::holds_alternative<SphericalCov>(spec_)) return "spherical";
  if (std::holds_alternative<DiagonalCov>(spec_)) return "diagonal";
  return "full";
}

Vector Covariance::apply(const Vector& v) const {
  if (auto* sph = std::get_if<SphericalCov>(&spec_)) return sph->s * v;
  if (auto* dg = std::get_if<DiagonalCov>(&spec_)) return dg->diag.cwiseProduct(v);
  return std::get<FullCov>(spec_).mat * v;
}

double Covariance::quad(const Vector& u, const Vector& v) const {
  if (auto* sph = std::get_if<SphericalCov>(&spec_)) return sph->s * u.dot(v);
  if (auto* dg = std::get_if<DiagonalCov>(&spec_)) return (dg->diag.array() * u.array() * v.array()).sum();
  return u.dot(std::get<FullCov>(spec_).mat * v);
}

Vector Covariance::factor_apply(const Vector& eps) const {
  if (auto* sph = std::get_if<SphericalCov>(&spec_)) return std::sqrt(sph->s) * eps;
  if (auto* dg = std::get_if<DiagonalCov>(&spec_)) return dg->diag.cwiseSqrt().cwiseProduct(eps);
  return chol_.triangularView<Eigen::Lower>() * eps;
}

double Covariance::lambda_max() const { return lambda_max_; }

double Covariance::trace() const {
  if (auto* sph = std::get_if<SphericalCov>(&spec_)) return sph->s * dim_;
  if (auto* dg = std::get_if<DiagonalCov>(&spec_)) return dg->diag.sum();
  return std::get<FullCov>(spec_).mat.trace();
}

Matrix Covariance::dense() const {
  if (auto* sph = std::get_if<SphericalCov>(&spec_)) return sph->s * Matrix::Identity(dim_, dim_);
  if (auto* dg = std::get_if<DiagonalCov>(&spec_)) return dg->diag.asDiagonal();
  return std::get<FullCov>(spec_).mat;
}

namespace {

int spec_dim(const CovarianceSpec& cov, const Vector& theta1) {
  if (auto* dg = std::get_if<DiagonalCov>(&cov)) return static_cast<int>(dg->diag.size());
  if (auto* full = std::get_if<FullCov>(&cov)) return static_cast<int>(full->mat.rows());
  return static_cast<int>(theta1.size());
}

}  // namespace

ModelSpec::ModelSpec(CovarianceSpec cov, Vector theta1, double theta0, Vector mu, LinkKind link)
    : cov_(cov, spec_dim(cov, theta1)),
      theta1_(std::move(theta1)),
      theta0_(theta0),
      mu_(std::move(mu)),
      link_(link) {
  if (theta1_.size() != cov_.dim()) throw ConfigError("theta1 length does not match dim");
  if (mu_.size() != cov_.dim()) throw ConfigError("mu length does not match dim");
  if (!theta1_.allFinite() || !mu_.allFinite() || !std::isfinite(theta0_))
    throw ConfigError("model parameters must be finite");
}

ModelSpec::ModelSpec(CovarianceSpec cov, Vector theta1, double theta0, LinkKind link)
    : ModelSpec(std::move(cov), theta1, theta0, Vector::Zero(theta1.size()), link) {}

ModelSpec ModelSpec::with_theta0(double theta0) const {
  ModelSpec m = *this;
  m.theta0_ = theta0;
  return m;
}

ModelSpec ModelSpec::with_mu(Vector mu) const {
  return ModelSpec(cov_.spec(), theta1_, theta0_, std::move(mu), link_);
}

Dataset sample_dataset(const ModelSpec& model, int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample size must be positive");
  const int d = model.dim();
  Dataset data;
  data.master_seed = seed;
  data.x.resize(n, d);
  data.y.resize(n);
  RandomStream rng(seed, 0);
  Vector eps(d);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) eps[k] = rng.normal();
    const Vector xi = model.covariance().factor_apply(eps) + model.mu();
    data.x.row(i) = xi.transpose();
    const double p_plus = link_value(model.link(), xi.dot(model.theta1()) + model.theta0());
    data.y[i] = rng.uniform() < p_plus ? 1.0 : -1.0;
  }
  return data;
}

Dataset to_label_weighted(const Dataset& data) {
  Dataset out = data;
  out.x = data.y.asDiagonal() * data.x;
  return out;
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out.precision(17);
  for (int k = 0; k < data.dim(); ++k) out << 'x' << (k + 1) << ',';
  out << "y\n";
  for (int i = 0; i < data.n(); ++i) {
    for (int k = 0; k < data.dim(); ++k) out << data.x(i, k) << ',';
    out << static_cast<int>(data.y[i]) << '\n';
  }
}

}  // namespace isoperi
