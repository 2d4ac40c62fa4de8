// SPDX-License-Identifier: Apache-2.0
#include "isoperi/risk.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "isoperi/errors.hpp"
#include "isoperi/rng.hpp"

namespace isoperi {

void OptimizerConfig::validate() const {
  if (restarts <= 0) throw ConfigError("optimizer.restarts must be positive");
  if (max_iters <= 0) throw ConfigError("optimizer.max_iters must be positive");
  if (!(step_init > 0.0) || !std::isfinite(step_init)) throw ConfigError("optimizer.step_init must be positive");
  if (!(step_decay > 0.0 && step_decay < 1.0)) throw ConfigError("optimizer.step_decay must lie in (0,1)");
  if (!(tol > 0.0 && tol < 1.0)) throw ConfigError("optimizer.tol must lie in (0,1)");
  if (quad_order_2d <= 0 || quad_order_2d > 500) throw ConfigError("optimizer.quad_order_2d must lie in [1,500]");
  if (audit_points < 0) throw ConfigError("optimizer.audit_points must be nonnegative");
  if (screen_points < 0) throw ConfigError("optimizer.screen_points must be nonnegative");
}

namespace {

// Rank-1 threshold on the 2x2 covariance of (S, T).
bool nearly_singular(double q, double v, double c) {
  const double det = q * v - c * c;
  const double tr = q + v;
  return det < 1e-14 * tr * tr;
}

}  // namespace

PopulationRisk::PopulationRisk(const ModelSpec& model, const LossSpec& loss, int quad_order)
    : model_(model), loss_(loss), rule_(&cached_gauss_hermite(quad_order)) {
  if (loss_.tag == LossTag::custom && (!loss_.value || !loss_.subgradient))
    throw ConfigError("custom loss needs value and subgradient callables");
  m_t_ = model_.mu().dot(model_.theta1());
  sigma_theta_ = model_.covariance().apply(model_.theta1());
  v_t_ = std::max(0.0, model_.theta1().dot(sigma_theta_));
  sd_t_ = std::sqrt(v_t_);
  const LinkKind link = model_.link();
  const double t0 = model_.theta0();
  if (loss_.tag == LossTag::logistic_loss) {
    ExpectationOptions opt;
    p_minus_ = expect_normal([&](double t) { return link_value(link, -(t + m_t_) - t0); }, sd_t_, opt,
                             "population risk P_minus");
    d_ = expect_normal([&](double t) { return link_derivative(link, t + m_t_ + t0); }, sd_t_, opt,
                       "population risk D");
  }
  const int m = sd_t_ > 0.0 ? rule_->order : 1;
  g_plus_.resize(m);
  g_minus_.resize(m);
  for (int i = 0; i < m; ++i) {
    const double t = m_t_ + (sd_t_ > 0.0 ? sd_t_ * rule_->nodes[i] : 0.0) + t0;
    g_plus_[i] = link_value(link, t);
    g_minus_[i] = link_value(link, -t);
  }
}

PopulationRisk::Moments PopulationRisk::moments(const Vector& w) const {
  if (w.size() != model_.dim()) throw ConfigError("w has wrong length");
  Moments mo;
  mo.sigma_w = model_.covariance().apply(w);
  mo.m_s = model_.mu().dot(w);
  mo.q = std::max(0.0, w.dot(mo.sigma_w));
  mo.c = model_.theta1().dot(mo.sigma_w);
  return mo;
}

double PopulationRisk::logistic_path(const Vector& w, double b, Vector* grad_w, double* grad_b) const {
  const Moments mo = moments(w);
  const double center = mo.m_s + b;
  double a = 0.0, da_dm = 0.0, da_ds = 0.0;
  const double s = std::sqrt(mo.q);
  if (s == 0.0) {
    a = loss_value(loss_, center);
    da_dm = loss_subgradient(loss_, center);
  } else {
    for (int j = 0; j < rule_->order; ++j) {
      const double x = rule_->nodes[j];
      const double om = rule_->weights[j];
      const double u = center + s * x;
      a += om * loss_value(loss_, u);
      const double d = om * loss_subgradient(loss_, u);
      da_dm += d;
      da_ds += d * x;
    }
  }
  const double value = a + center * p_minus_ - mo.c * d_;
  if (grad_w) {
    *grad_w = (da_dm + p_minus_) * model_.mu() - d_ * sigma_theta_;
    if (s > 0.0) *grad_w += (da_ds / s) * mo.sigma_w;
    *grad_b = da_dm + p_minus_;
  }
  return value;
}

namespace {

// E max(0, M + tau V), V ~ N(0,1), and its partials in M and tau.
struct ReluMoment {
  double value, d_m, d_tau;
};

ReluMoment relu_moment(double m, double tau) {
  if (tau <= 0.0) return {std::max(m, 0.0), m > 0.0 ? 1.0 : 0.0, 0.0};
  const double z = m / tau;
  const double cdf = normal_cdf(z), pdf = normal_pdf(z);
  return {m * cdf + tau * pdf, cdf, pdf};
}

}  // namespace

namespace {

// Composite Gauss-Legendre rule for u ~ N(0,1) on [-10, 10] with breakpoints
// at the kinks u_k of the conditional hinge margin and panels growing by 4x
// away from them, starting at the transition width. Gauss-Hermite misses
// these near-kinks when the conditional spread tau is small against the slope.
void kink_rule(const std::vector<double>& kinks, double width, std::vector<double>& nodes,
               std::vector<double>& weights) {
  constexpr double kEdge = 10.0;
  // Unit panels carry the Gaussian weight on their own, kinks or not.
  std::vector<double> cuts;
  for (int k = -10; k <= 10; ++k) cuts.push_back(k);
  const double h0 = std::max(width, 1e-4);
  for (double k : kinks) {
    if (!(std::abs(k) < kEdge)) continue;
    cuts.push_back(k);
    for (double h = h0; h < 2.0 * kEdge; h *= 4.0) {
      if (k - h > -kEdge) cuts.push_back(k - h);
      if (k + h < kEdge) cuts.push_back(k + h);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  static const QuadratureRule gl = gauss_legendre(8);
  nodes.clear();
  weights.clear();
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double mid = 0.5 * (cuts[p] + cuts[p + 1]), half = 0.5 * (cuts[p + 1] - cuts[p]);
    for (int j = 0; j < gl.order; ++j) {
      const double u = mid + half * gl.nodes[j];
      nodes.push_back(u);
      weights.push_back(half * gl.weights[j] * normal_pdf(u));
    }
  }
}

}  // namespace

double PopulationRisk::hinge_path(const Vector& w, double b, Vector* grad_w, double* grad_b) const {
  const Moments mo = moments(w);
  const bool has_t = sd_t_ > 0.0;
  double tau = 0.0;
  if (has_t && !nearly_singular(mo.q, v_t_, mo.c)) tau = std::sqrt(std::max(0.0, mo.q - mo.c * mo.c / v_t_));
  else if (!has_t) tau = std::sqrt(mo.q);
  const double slope = has_t ? mo.c / sd_t_ : 0.0;
  const double centre = mo.m_s + b;

  // Margin kinks sit at centre + slope u = +-1; resolve them explicitly when
  // their smoothing width tau / |slope| is under one standard deviation of u.
  const bool sharp = has_t && slope != 0.0 && tau < std::abs(slope);
  std::vector<double> kn, kw, kg_plus, kg_minus;
  if (sharp) {
    kink_rule({(1.0 - centre) / slope, (-1.0 - centre) / slope}, tau / std::abs(slope), kn, kw);
    const LinkKind link = model_.link();
    kg_plus.resize(kn.size());
    kg_minus.resize(kn.size());
    for (std::size_t i = 0; i < kn.size(); ++i) {
      const double t = m_t_ + sd_t_ * kn[i] + model_.theta0();
      kg_plus[i] = link_value(link, t);
      kg_minus[i] = link_value(link, -t);
    }
  }
  const int m = sharp ? static_cast<int>(kn.size()) : static_cast<int>(g_plus_.size());
  const double* us = sharp ? kn.data() : (has_t ? rule_->nodes.data() : nullptr);
  const double* oms = sharp ? kw.data() : (has_t ? rule_->weights.data() : nullptr);
  const double* gp = sharp ? kg_plus.data() : g_plus_.data();
  const double* gm = sharp ? kg_minus.data() : g_minus_.data();

  double value = 0.0, d_center = 0.0, d_slope = 0.0, d_tau = 0.0;
  for (int i = 0; i < m; ++i) {
    const double u = us ? us[i] : 0.0;
    const double om = oms ? oms[i] : 1.0;
    const double shift = centre + slope * u;
    // l(S + b) = max(0, 1 - S - b), l(-S - b) = max(0, 1 + S + b).
    const ReluMoment rp = relu_moment(1.0 - shift, tau);
    const ReluMoment rm = relu_moment(1.0 + shift, tau);
    value += om * (gp[i] * rp.value + gm[i] * rm.value);
    const double dc = om * (-gp[i] * rp.d_m + gm[i] * rm.d_m);
    d_center += dc;
    d_slope += dc * u;
    d_tau += om * (gp[i] * rp.d_tau + gm[i] * rm.d_tau);
  }
  if (grad_w) {
    *grad_w = d_center * model_.mu();
    if (has_t) *grad_w += (d_slope / sd_t_) * sigma_theta_;
    if (tau > 0.0) {
      Vector dtau = mo.sigma_w;
      if (has_t) dtau -= (mo.c / v_t_) * sigma_theta_;
      *grad_w += (d_tau / tau) * dtau;
    }
    *grad_b = d_center;
  }
  return value;
}

double PopulationRisk::generic_path(const Vector& w, double b, Vector* grad_w, double* grad_b) const {
  const Moments mo = moments(w);
  const bool has_t = sd_t_ > 0.0;
  double tau = 0.0;
  if (has_t && !nearly_singular(mo.q, v_t_, mo.c)) tau = std::sqrt(std::max(0.0, mo.q - mo.c * mo.c / v_t_));
  else if (!has_t) tau = std::sqrt(mo.q);
  const double slope = has_t ? mo.c / sd_t_ : 0.0;
  const int mu_nodes = static_cast<int>(g_plus_.size());
  const int mv_nodes = tau > 0.0 ? rule_->order : 1;
  double value = 0.0, psi = 0.0, psi_u = 0.0, psi_v = 0.0;
  for (int i = 0; i < mu_nodes; ++i) {
    const double u = has_t ? rule_->nodes[i] : 0.0;
    const double om_u = has_t ? rule_->weights[i] : 1.0;
    for (int j = 0; j < mv_nodes; ++j) {
      const double v = tau > 0.0 ? rule_->nodes[j] : 0.0;
      const double om = om_u * (tau > 0.0 ? rule_->weights[j] : 1.0);
      const double t = mo.m_s + b + slope * u + tau * v;
      value += om * (g_plus_[i] * loss_value(loss_, t) + g_minus_[i] * loss_value(loss_, -t));
      const double p = om * (g_plus_[i] * loss_subgradient(loss_, t) - g_minus_[i] * loss_subgradient(loss_, -t));
      psi += p;
      psi_u += p * u;
      psi_v += p * v;
    }
  }
  if (grad_w) {
    *grad_w = psi * model_.mu();
    if (has_t) *grad_w += (psi_u / sd_t_) * sigma_theta_;
    if (tau > 0.0) {
      Vector dtau = mo.sigma_w;
      if (has_t) dtau -= (mo.c / v_t_) * sigma_theta_;
      *grad_w += (psi_v / tau) * dtau;
    }
    *grad_b = psi;
  }
  return value;
}

double PopulationRisk::value(const Vector& w, double b) const {
  switch (loss_.tag) {
    case LossTag::logistic_loss: return logistic_path(w, b, nullptr, nullptr);
    case LossTag::hinge: return hinge_path(w, b, nullptr, nullptr);
    case LossTag::custom: break;
  }
  return generic_path(w, b, nullptr, nullptr);
}

double PopulationRisk::value_and_gradient(const Vector& w, double b, Vector& grad_w, double& grad_b) const {
  switch (loss_.tag) {
    case LossTag::logistic_loss: return logistic_path(w, b, &grad_w, &grad_b);
    case LossTag::hinge: return hinge_path(w, b, &grad_w, &grad_b);
    case LossTag::custom: break;
  }
  return generic_path(w, b, &grad_w, &grad_b);
}

double PopulationRisk::value_generic(const Vector& w, double b) const { return generic_path(w, b, nullptr, nullptr); }

double PopulationRisk::value_and_gradient_generic(const Vector& w, double b, Vector& grad_w, double& grad_b) const {
  return generic_path(w, b, &grad_w, &grad_b);
}

EmpiricalRisk::EmpiricalRisk(const Dataset& data, const LossSpec& loss) : y_(data.y), loss_(loss) {
  if (data.n() == 0) throw ConfigError("empirical risk needs at least one sample");
  z_ = data.y.asDiagonal() * data.x;
}

double EmpiricalRisk::value(const Vector& w, double b) const {
  if (w.size() != z_.cols()) throw ConfigError("w has wrong length");
  const Vector margins = z_ * w + b * y_;
  double total = 0.0;
  for (Eigen::Index i = 0; i < margins.size(); ++i) total += loss_value(loss_, margins[i]);
  return total / static_cast<double>(margins.size());
}

double EmpiricalRisk::value_and_gradient(const Vector& w, double b, Vector& grad_w, double& grad_b) const {
  if (w.size() != z_.cols()) throw ConfigError("w has wrong length");
  const Vector margins = z_ * w + b * y_;
  const double inv_n = 1.0 / static_cast<double>(margins.size());
  Vector slopes(margins.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < margins.size(); ++i) {
    total += loss_value(loss_, margins[i]);
    slopes[i] = loss_subgradient(loss_, margins[i]);
  }
  grad_w = inv_n * (z_.transpose() * slopes);
  grad_b = inv_n * slopes.dot(y_);
  return total * inv_n;
}

double empirical_risk(const Dataset& data, const LossSpec& loss, const Vector& w, double b) {
  return EmpiricalRisk(data, loss).value(w, b);
}

double population_risk(const ModelSpec& model, const LossSpec& loss, const Vector& w, double b, int quad_order) {
  return PopulationRisk(model, loss, quad_order).value(w, b);
}

double gap(const Dataset& data, const ModelSpec& model, const LossSpec& loss, const Vector& w, double b) {
  return population_risk(model, loss, w, b) - empirical_risk(data, loss, w, b);
}

namespace {

struct Point {
  Vector w;
  double b = 0.0;
};

class GapObjective {
 public:
  GapObjective(const Dataset& data, const ModelSpec& model, const LossSpec& loss, int quad_order, bool negate)
      : pop_(model, loss, quad_order), emp_(data, loss), sign_(negate ? -1.0 : 1.0) {}

  double value(const Point& p) const { return sign_ * (pop_.value(p.w, p.b) - emp_.value(p.w, p.b)); }

  double value_and_gradient(const Point& p, Point& grad) const {
    Vector gw_pop, gw_emp;
    double gb_pop = 0.0, gb_emp = 0.0;
    const double r = pop_.value_and_gradient(p.w, p.b, gw_pop, gb_pop);
    const double rn = emp_.value_and_gradient(p.w, p.b, gw_emp, gb_emp);
    grad.w = sign_ * (gw_pop - gw_emp);
    grad.b = sign_ * (gb_pop - gb_emp);
    return sign_ * (r - rn);
  }

 private:
  PopulationRisk pop_;
  EmpiricalRisk emp_;
  double sign_;
};

void project(Point& p, const ConstraintSet& cs) {
  const double norm = p.w.norm();
  if (norm > cs.r_w) {
    if (cs.r_w == 0.0) p.w.setZero();
    else p.w *= cs.r_w / norm;
  }
  p.b = std::clamp(p.b, -cs.r_b, cs.r_b);
}

Vector random_unit(RandomStream& rng, int d) {
  Vector v(d);
  for (;;) {
    for (int k = 0; k < d; ++k) v[k] = rng.normal();
    const double n = v.norm();
    if (n > 0.0) return v / n;
  }
}

struct AscentOutcome {
  Point point;
  double value;
  bool converged;
};

AscentOutcome ascend(const GapObjective& f, Point x, const ConstraintSet& cs, const OptimizerConfig& cfg,
                     double radius, int start, std::ofstream* trace) {
  Point grad;
  double fx = f.value_and_gradient(x, grad);
  bool converged = false;
  int small_steps = 0;
  for (int k = 0; k < cfg.max_iters; ++k) {
    const double gnorm = std::sqrt(grad.w.squaredNorm() + grad.b * grad.b);
    if (!(gnorm > 0.0)) {
      converged = true;
      break;
    }
    double eta = cfg.step_init * radius * std::pow(cfg.step_decay, k);
    bool accepted = false;
    Point trial;
    double ft = fx;
    for (int bt = 0; bt < 40; ++bt) {
      trial.w = x.w + (eta / gnorm) * grad.w;
      trial.b = x.b + (eta / gnorm) * grad.b;
      project(trial, cs);
      ft = f.value(trial);
      if (ft > fx) {
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) {
      converged = true;
      break;
    }
    const double gain = ft - fx;
    x = trial;
    fx = f.value_and_gradient(x, grad);
    if (trace) *trace << start << ',' << k << ',' << fx << ',' << eta << ',' << x.w.norm() << '\n';
    if (gain < cfg.tol) {
      if (++small_steps >= 5) {
        converged = true;
        break;
      }
    } else {
      small_steps = 0;
    }
  }
  return {x, fx, converged};
}

// Derivative-free coordinate search; picks up kinks that stall the ascent.
void compass_polish(const GapObjective& f, Point& x, double& fx, const ConstraintSet& cs, double radius) {
  const int d = static_cast<int>(x.w.size());
  double step = 1e-2 * radius;
  const double floor = 1e-10 * radius;
  int evaluations = 0;
  while (step > floor && evaluations < 20000) {
    bool improved = false;
    for (int k = 0; k <= d; ++k) {
      if (k == d && cs.r_b == 0.0) continue;
      if (k < d && cs.r_w == 0.0) continue;
      for (double sgn : {1.0, -1.0}) {
        Point t = x;
        if (k < d) t.w[k] += sgn * step;
        else t.b += sgn * step;
        project(t, cs);
        const double ft = f.value(t);
        ++evaluations;
        if (ft > fx) {
          x = t;
          fx = ft;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
}

Point random_feasible(RandomStream& rng, int d, const ConstraintSet& cs) {
  Point p;
  const double r = cs.r_w * std::pow(rng.uniform(), 1.0 / std::max(d, 1));
  p.w = r * random_unit(rng, d);
  p.b = cs.r_b * (2.0 * rng.uniform() - 1.0);
  return p;
}

}  // namespace

SupResult sup_gap(const Dataset& data, const ModelSpec& model, const LossSpec& loss,
                  const ConstraintSet& constraints, const OptimizerConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  constraints.validate();
  if (data.dim() != model.dim()) throw ConfigError("dataset and model dimensions differ");
  const int d = model.dim();
  const GapObjective f(data, model, loss, cfg.quad_order_2d, cfg.negate);

  SupResult out;
  Point origin{Vector::Zero(d), 0.0};
  const double radius = std::sqrt(constraints.r_w * constraints.r_w + constraints.r_b * constraints.r_b);
  // Both risks equal l(0) at the origin, so F(0, 0) = 0 exactly; quadrature
  // would only add rounding there.
  if (radius == 0.0) {
    out.value = 0.0;
    out.argmax_w = origin.w;
    out.starts_used = 1;
    return out;
  }

  RandomStream rng(seed, 0x5A17);
  std::vector<Point> starts;
  starts.push_back(origin);
  {
    Point g;
    f.value_and_gradient(origin, g);
    Point s = origin;
    if (g.w.norm() > 0.0) s.w = constraints.r_w * g.w / g.w.norm();
    s.b = g.b > 0.0 ? constraints.r_b : (g.b < 0.0 ? -constraints.r_b : 0.0);
    starts.push_back(s);
  }
  const double t_norm = model.theta1().norm();
  if (t_norm > 0.0) {
    const Vector dir = model.theta1() / t_norm;
    starts.push_back({constraints.r_w * dir, 0.0});
    starts.push_back({-constraints.r_w * dir, 0.0});
  }
  for (int k = 0; k < std::min(d, 4); ++k) {
    Point s = origin;
    s.w[k] = constraints.r_w;
    starts.push_back(s);
  }
  // Remaining starts: the best of a random screen, half of it on the sphere
  // ||w|| = R_w where the maximizer usually sits. Nonsmooth losses have many
  // local maxima, so this matters more than the ascent itself.
  const int free_slots = cfg.restarts - static_cast<int>(starts.size());
  if (free_slots > 0) {
    std::vector<std::pair<double, Point>> screen;
    const int count = std::max(cfg.screen_points, free_slots);
    screen.reserve(count);
    for (int k = 0; k < count; ++k) {
      Point s = k % 2 == 0 ? Point{constraints.r_w * random_unit(rng, d), constraints.r_b * (2.0 * rng.uniform() - 1.0)}
                           : random_feasible(rng, d, constraints);
      const double v = f.value(s);
      screen.emplace_back(v, std::move(s));
    }
    std::partial_sort(screen.begin(), screen.begin() + free_slots, screen.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int k = 0; k < free_slots; ++k) starts.push_back(screen[k].second);
  }
  starts.resize(std::min<std::size_t>(starts.size(), std::max(cfg.restarts, 1)));

  std::ofstream trace_file;
  std::ofstream* trace = nullptr;
  if (!cfg.trace_path.empty()) {
    trace_file.open(cfg.trace_path);
    if (!trace_file) throw ConfigError("cannot open optimizer trace '" + cfg.trace_path + "'");
    trace_file << "start,iter,F,step,norm_w\n";
    trace_file.precision(17);
    trace = &trace_file;
  }

  Point best = origin;
  double best_value = 0.0;
  bool best_converged = true;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    Point s = starts[i];
    project(s, constraints);
    const AscentOutcome o = ascend(f, s, constraints, cfg, radius, static_cast<int>(i), trace);
    if (o.value > best_value) {
      best = o.point;
      best_value = o.value;
      best_converged = o.converged;
    }
  }
  if (cfg.polish && d <= 10) compass_polish(f, best, best_value, constraints, radius);

  for (int a = 0; a < cfg.audit_points; ++a) {
    const Point p = random_feasible(rng, d, constraints);
    const double v = f.value(p);
    if (v > best_value) {
      ++out.audit_violations;
      best = p;
      best_value = v;
      best_converged = false;
    }
  }

  out.value = best_value;
  out.argmax_w = best.w;
  out.argmax_b = best.b;
  out.starts_used = static_cast<int>(starts.size());
  out.converged = best_converged;
  return out;
}

double grid_oracle_sup(const Dataset& data, const ModelSpec& model, const LossSpec& loss,
                       const ConstraintSet& constraints, int resolution, bool negate) {
  constraints.validate();
  const int d = model.dim();
  if (d > 3) throw ConfigError("grid_oracle_sup supports d <= 3 (got " + std::to_string(d) + ")");
  if (resolution < 2 || resolution > 201) throw ConfigError("grid_oracle_sup resolution must lie in [2, 201]");
  if (data.dim() != d) throw ConfigError("dataset and model dimensions differ");
  const GapObjective f(data, model, loss, 60, negate);
  const double rw = constraints.r_w, rb = constraints.r_b;

  std::vector<Vector> ws;
  const auto lin = [&](int i, double r) { return resolution == 1 ? 0.0 : -r + 2.0 * r * i / (resolution - 1); };
  if (rw == 0.0) {
    ws.push_back(Vector::Zero(d));
  } else if (d == 1) {
    for (int i = 0; i < resolution; ++i) ws.push_back(Vector::Constant(1, lin(i, rw)));
  } else if (d == 2) {
    ws.push_back(Vector::Zero(2));
    for (int i = 1; i < resolution; ++i) {
      const double r = rw * i / (resolution - 1);
      for (int j = 0; j < resolution; ++j) {
        const double a = 2.0 * M_PI * j / resolution;
        ws.push_back((Vector(2) << r * std::cos(a), r * std::sin(a)).finished());
      }
    }
  } else {
    for (int i = 0; i < resolution; ++i)
      for (int j = 0; j < resolution; ++j)
        for (int k = 0; k < resolution; ++k) {
          Vector w = (Vector(3) << lin(i, rw), lin(j, rw), lin(k, rw)).finished();
          if (w.norm() <= rw) ws.push_back(w);
        }
  }
  std::vector<double> bs;
  if (rb == 0.0) bs.push_back(0.0);
  else
    for (int i = 0; i < resolution; ++i) bs.push_back(lin(i, rb));

  struct Cand {
    double value;
    Point p;
  };
  constexpr int keep = 8;
  std::vector<Cand> top;
  double best = -std::numeric_limits<double>::infinity();
  for (const Vector& w : ws)
    for (double b : bs) {
      const Point p{w, b};
      const double v = f.value(p);
      best = std::max(best, v);
      if (static_cast<int>(top.size()) < keep || v > top.back().value) {
        top.push_back({v, p});
        std::sort(top.begin(), top.end(), [](const Cand& x, const Cand& y) { return x.value > y.value; });
        if (static_cast<int>(top.size()) > keep) top.pop_back();
      }
    }

  // Local zoom: a 5^(d+1) stencil around each candidate, recentred on the
  // best point and shrunk by 2 per level.
  const double spacing_w = rw * (d == 2 ? 2.0 * M_PI / resolution : 2.0 / std::max(resolution - 1, 1));
  const double spacing_b = rb * 2.0 / std::max(resolution - 1, 1);
  for (Cand& c : top) {
    double hw = 2.0 * spacing_w, hb = 2.0 * spacing_b;
    for (int level = 0; level < 40 && (hw > 1e-12 || hb > 1e-12); ++level) {
      Point centre = c.p;
      const int m = 5;
      const int dims = d + 1;
      long total = 1;
      for (int k = 0; k < dims; ++k) total *= m;
      for (long idx = 0; idx < total; ++idx) {
        long r = idx;
        Point t = centre;
        for (int k = 0; k < dims; ++k) {
          const double off = (static_cast<int>(r % m) - (m / 2)) / double(m / 2);
          r /= m;
          if (k < d) t.w[k] += off * hw;
          else t.b += off * hb;
        }
        project(t, constraints);
        const double v = f.value(t);
        if (v > c.value) {
          c.value = v;
          c.p = t;
        }
      }
      hw *= 0.5;
      hb *= 0.5;
    }
    best = std::max(best, c.value);
  }
  return best;
}

double gradient_check(const ModelSpec& model, const LossSpec& loss, const Vector& w, double b, int quad_order) {
  const PopulationRisk risk(model, loss, quad_order);
  Vector gw;
  double gb = 0.0;
  risk.value_and_gradient(w, b, gw, gb);
  constexpr double h = 1e-5;
  const int d = static_cast<int>(w.size());
  double worst = 0.0;
  const auto rel = [](double analytic, double fd) { return std::abs(analytic - fd) / std::max(std::abs(fd), 1e-6); };
  for (int k = 0; k < d; ++k) {
    Vector wp = w, wm = w;
    wp[k] += h;
    wm[k] -= h;
    const double fd = (risk.value(wp, b) - risk.value(wm, b)) / (2.0 * h);
    worst = std::max(worst, rel(gw[k], fd));
  }
  const double fd_b = (risk.value(w, b + h) - risk.value(w, b - h)) / (2.0 * h);
  return std::max(worst, rel(gb, fd_b));
}

}  // namespace isoperi
