// SPDX-License-Identifier: Apache-2.0
#include "isoperi/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace isoperi {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();

// log(sum_i exp(x_i)), ignoring -inf terms.
double log_sum(std::initializer_list<double> terms) {
  double top = kNegInf;
  for (double t : terms) top = std::max(top, t);
  if (top == kNegInf || top == kInf) return top;
  double acc = 0.0;
  for (double t : terms)
    if (t != kNegInf) acc += std::exp(t - top);
  return top + std::log(acc);
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

// log(e^x - 1) for x >= 0.
double log_expm1(double x) {
  if (x <= 0.0) return kNegInf;
  return x > 30.0 ? x + std::log1p(-std::exp(-x)) : std::log(std::expm1(x));
}

struct Common {
  double log_l2;       // log L^2
  double log_rw2;      // log R_w^2
  double log_rb2;      // log R_b^2
  double log_n;
  double log_pc;       // log (log(3/delta))^2
  double log_ls;       // log log(1/delta)
};

Common common(const BoundInput& in) {
  Common c;
  c.log_l2 = 2.0 * std::log(in.loss_lipschitz);
  c.log_rw2 = 2.0 * safe_log(in.constraints.r_w);
  c.log_rb2 = 2.0 * safe_log(in.constraints.r_b);
  c.log_n = std::log(static_cast<double>(in.n));
  c.log_pc = 2.0 * safe_log(std::log(3.0 / in.delta));
  c.log_ls = safe_log(std::log(1.0 / in.delta));
  return c;
}

// sqrt(L^2 A (log 3/delta)^2 / n) given log A.
Residual poincare_shape(const Common& c, double log_a) {
  return Residual::from_log(0.5 * (c.log_l2 + log_a + c.log_pc - c.log_n));
}

// sqrt(factor L^2 B log(1/delta) / n) given log(factor B).
Residual logsobolev_shape(const Common& c, double log_b) {
  return Residual::from_log(0.5 * (c.log_l2 + log_b + c.log_ls - c.log_n));
}

ResidualResult ok(Residual r) { return {r, "", std::nullopt}; }

std::optional<std::string> require_central(const BoundInput& in) {
  if (!in.model.central()) return "noncentral input (mu != 0): use the noncentral or generic entry";
  return std::nullopt;
}

std::optional<double> link_g(const BoundInput& in) { return in.model.link().lipschitz_of_log(); }

}  // namespace

std::string to_string(Mode mode) { return mode == Mode::poincare ? "poincare" : "logsobolev"; }

Mode parse_mode(const std::string& name) {
  if (name == "poincare") return Mode::poincare;
  if (name == "logsobolev") return Mode::logsobolev;
  throw ConfigError("unknown mode '" + name + "' (expected poincare|logsobolev)");
}

Residual Residual::from_log(double log_value) {
  Residual r;
  r.log_value = log_value;
  r.value = std::exp(log_value);
  return r;
}

void BoundInput::validate() const {
  constraints.validate();
  if (!(loss_lipschitz > 0.0) || !std::isfinite(loss_lipschitz)) throw ConfigError("loss Lipschitz constant must be positive");
  if (n < 1) throw ConfigError("n must be at least 1");
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
}

BoundInput BoundInput::with_mode(Mode m) const {
  BoundInput out = *this;
  out.mode = m;
  return out;
}

BoundInput BoundInput::with_delta(double d) const {
  BoundInput out = *this;
  out.delta = d;
  return out;
}

ScalarFunctionals scalar_functionals(const ModelSpec& model, const ExpectationOptions& opt) {
  ScalarFunctionals f;
  f.theta0_eff = model.effective_bias();
  f.signal_variance = signal_variance(model);
  f.log_mgf_theta1 = 0.5 * f.signal_variance;
  if (auto g = model.link().lipschitz_of_log()) {
    f.log_mgf_num_g = log_mgf_num(model, *g, opt);
    f.log_mgf_num_2g = log_mgf_num(model, 2.0 * *g, opt);
    f.log_mgf_den_g = log_mgf_den(model, *g, opt);
  }
  f.log_tilde_m_inverse = log_tilde_m_inverse(model, opt);
  f.p_exceed = p_exceed(model);
  const double s = std::sqrt(f.signal_variance);
  const double b = std::abs(f.theta0_eff);
  if (s > 0.0) f.log_p_exceed = log_link_value(LinkKind::probit(), -b / s);
  else f.log_p_exceed = b == 0.0 ? std::log(0.5) : kNegInf;
  return f;
}

double rademacher_bound(double L, double r_w, double r_b, double trace_second_moment, int n) {
  if (n < 1) throw ConfigError("n must be at least 1");
  if (trace_second_moment < 0.0) throw ConfigError("trace of the second moment must be nonnegative");
  return 2.0 * L * (r_w * std::sqrt(trace_second_moment) + r_b) / std::sqrt(static_cast<double>(n));
}

ResidualResult residual_no_bias(const BoundInput& in) {
  in.validate();
  if (auto why = require_central(in)) return ResidualResult::inapplicable(*why);
  if (in.model.theta0() != 0.0) return ResidualResult::inapplicable("bias nonzero: Z and Y are dependent");
  const Common c = common(in);
  const KConstants& k = in.kconst;
  if (in.mode == Mode::poincare)
    return ok(poincare_shape(c, log_sum({std::log(k.k_p) + c.log_rw2, c.log_rb2})));
  return ok(logsobolev_shape(c, std::log(2.0) + log_sum({std::log(k.k_ls) + c.log_rw2, c.log_rb2})));
}

ResidualResult residual_small_bias(const BoundInput& in) {
  return residual_small_bias(in, scalar_functionals(in.model));
}

ResidualResult residual_small_bias(const BoundInput& in, const ScalarFunctionals&) {
  in.validate();
  if (auto why = require_central(in)) return ResidualResult::inapplicable(*why);
  const auto g = link_g(in);
  if (!g) return ResidualResult::inapplicable("log-link not Lipschitz (probit has no G)");
  const Common c = common(in);
  const KConstants& k = in.kconst;
  const double x = 2.0 * *g * std::abs(in.model.theta0());  // log E, E = e^{2G|theta0|}
  const double log_root = 0.5 * log_expm1(x);                // log sqrt(E - 1)
  if (in.mode == Mode::poincare) {
    const double a_w = std::log(k.k_p) + log_sum({x, log_root}) + c.log_rw2;
    const double a_b = log_sum({0.0, log_root}) + c.log_rb2;
    return ok(poincare_shape(c, log_sum({a_w, a_b})));
  }
  const double inner = log_sum({std::log(k.k_ls) + log_sum({std::log(0.5), x}) + c.log_rw2, c.log_rb2});
  return ok(logsobolev_shape(c, std::log(2.0) + std::log(3.0 + x) + inner));
}

ResidualResult residual_large_bias(const BoundInput& in) {
  return residual_large_bias(in, scalar_functionals(in.model));
}

ResidualResult residual_large_bias(const BoundInput& in, const ScalarFunctionals& f) {
  in.validate();
  if (auto why = require_central(in)) return ResidualResult::inapplicable(*why);
  if (in.model.link().tag != LinkTag::logistic) return ResidualResult::inapplicable("requires the logistic link");
  const Common c = common(in);
  const KConstants& k = in.kconst;
  const double b = std::abs(in.model.theta0());
  const double log_m = f.log_mgf_theta1;
  const double log_8m2 = std::log(8.0) + 2.0 * log_m;
  const double log_bias_term = std::log(8.0) - b + log_m + c.log_rb2;  // 8 e^{-|theta0|} M R_b^2
  if (in.mode == Mode::poincare) {
    const double log_8m2_minus_1 = log_8m2 + std::log1p(-std::exp(-log_8m2));
    return ok(poincare_shape(c, log_sum({std::log(k.k_p) + log_8m2_minus_1 + c.log_rw2, log_bias_term})));
  }
  const double inner = log_sum({std::log(k.k_ls) + log_sum({std::log(0.5), log_8m2}) + c.log_rw2, log_bias_term});
  return ok(logsobolev_shape(c, std::log(std::numbers::e + b) + inner));
}

ResidualResult residual_weak_signal(const BoundInput& in) {
  return residual_weak_signal(in, scalar_functionals(in.model));
}

ResidualResult residual_weak_signal(const BoundInput& in, const ScalarFunctionals& f) {
  in.validate();
  if (auto why = require_central(in)) return ResidualResult::inapplicable(*why);
  if (!link_g(in) || !f.log_mgf_num_g) return ResidualResult::inapplicable("log-link not Lipschitz (probit has no G)");
  const Common c = common(in);
  const KConstants& k = in.kconst;
  const LinkKind link = in.model.link();
  const double t0 = in.model.theta0();
  const double log_n1 = *f.log_mgf_num_g;
  const double log_n2 = *f.log_mgf_num_2g;
  const double log_gg = log_link_value(link, t0) + log_link_value(link, -t0);
  const double log_bias_term = std::log(8.0) + log_gg + log_n1 + c.log_rb2;
  if (in.mode == Mode::poincare) {
    const double log_4nn = std::log(4.0) + log_n1 + log_n2;
    const double log_4nn_minus_1 = log_4nn + std::log1p(-std::exp(-log_4nn));
    return ok(poincare_shape(c, log_sum({std::log(k.k_p) + log_4nn_minus_1 + c.log_rw2, log_bias_term})));
  }
  const double factor = 1.0 + 0.5 * (-log_link_value(link, -std::abs(t0)) - *f.log_mgf_den_g);
  const double inner = log_sum({std::log(5.0 * k.k_ls) + log_n1 + log_n2 + c.log_rw2, log_bias_term});
  return ok(logsobolev_shape(c, std::log(2.0) + std::log(factor) + inner));
}

ResidualResult residual_strong_signal(const BoundInput& in) {
  return residual_strong_signal(in, scalar_functionals(in.model));
}

ResidualResult residual_strong_signal(const BoundInput& in, const ScalarFunctionals& f) {
  in.validate();
  if (auto why = require_central(in)) return ResidualResult::inapplicable(*why);
  if (in.model.link().tag != LinkTag::logistic) return ResidualResult::inapplicable("requires the logistic link");
  const Common c = common(in);
  const KConstants& k = in.kconst;
  const double log_q = 5.0 * std::abs(in.model.theta0()) + f.log_tilde_m_inverse;  // e^{5|theta0|} / M~
  if (in.mode == Mode::poincare) {
    const double a_w = std::log(k.k_p) + log_sum({0.0, log_q, 0.5 * log_q}) + c.log_rw2;
    const double a_b = log_sum({0.0, 0.5 * log_q}) + c.log_rb2;
    return ok(poincare_shape(c, log_sum({a_w, a_b})));
  }
  if (f.log_p_exceed == kNegInf)
    return ResidualResult::inapplicable("P(<X,theta1> >= |theta0|) = 0: log(1/p) is infinite");
  const double inner = log_sum({std::log(k.k_ls) + log_sum({std::log(1.25), log_q}) + c.log_rw2, c.log_rb2});
  return ok(logsobolev_shape(c, std::log(2.0) + std::log(std::numbers::e - f.log_p_exceed) + inner));
}

ResidualResult residual_noncentral(const BoundInput& in) {
  return residual_noncentral(in, scalar_functionals(in.model));
}

ResidualResult residual_noncentral(const BoundInput& in, const ScalarFunctionals& f) {
  in.validate();
  const auto g = link_g(in);
  if (!g) return ResidualResult::inapplicable("log-link not Lipschitz (probit has no G)");
  if (in.mode != Mode::poincare)
    return ResidualResult::inapplicable("the noncentral bound is stated in the Poincare form only");
  const Common c = common(in);
  const KConstants& k = in.kconst;
  const double x = 2.0 * *g * std::abs(f.theta0_eff);
  const double log_root = 0.5 * log_expm1(x);
  const double log_mu2 = safe_log(in.model.mu().squaredNorm());
  const double a_w = std::log(k.k_p) + log_sum({x, log_root}) + c.log_rw2;
  const double a_b = log_sum({0.0, log_root}) + log_sum({log_mu2 + c.log_rw2, c.log_rb2});
  return ok(poincare_shape(c, log_sum({a_w, a_b})));
}

Residual residual_theorem1_generic(const KConstants& k, double c, double L, double r_w, double r_b, int n,
                                   double delta, Mode mode) {
  if (!(c >= 1.0)) throw ConfigError("conjugate exponent c must be >= 1");
  if (n < 1) throw ConfigError("n must be at least 1");
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
  // Weights with the convention inf * 0 = 0.
  const auto times = [](double a, double b) { return (a == 0.0 || b == 0.0) ? 0.0 : a * b; };
  const double c_star = std::isinf(c) ? 1.0 : (c == 1.0 ? kInf : c / (c - 1.0));
  const double w_z = k.k_p * (1.0 + times(c, k.k_chi2));
  const double l2 = L * L;
  const double p = times(w_z, l2 * r_w * r_w) + times(c_star * k.k_v, l2 * r_b * r_b);
  if (mode == Mode::poincare) return Residual::from_log(0.5 * (safe_log(p) - std::log(n)) + safe_log(std::log(3.0 / delta)));
  const double ls = times(1.0 + 0.5 * std::log(k.k_u), p) + 2.0 * k.k_ls * l2 * r_w * r_w;
  return Residual::from_log(0.5 * (std::log(2.0) + safe_log(ls) - std::log(n) + safe_log(std::log(1.0 / delta))));
}

std::vector<double> generic_c_grid(const KConstants& k) {
  std::vector<double> grid;
  for (int e = -10; e <= 10; ++e) grid.push_back(1.0 + std::ldexp(1.0, e));
  grid.push_back(2.0);
  if (k.k_chi2 == 0.0) grid.push_back(kInf);
  return grid;
}

ResidualResult residual_generic_best(const BoundInput& in) {
  in.validate();
  // Flipping Y_i moves the margin by 2|b + <mu, w>| for the centered input.
  const double r_b = in.constraints.r_b + in.model.mu().norm() * in.constraints.r_w;
  ResidualResult best = ResidualResult::inapplicable("no finite value on the c-grid");
  for (double c : generic_c_grid(in.kconst)) {
    const Residual r = residual_theorem1_generic(in.kconst, c, in.loss_lipschitz, in.constraints.r_w, r_b, in.n,
                                                 in.delta, in.mode);
    if (!std::isfinite(r.log_value) && r.log_value != kNegInf) continue;
    if (!best.residual || r.log_value < best.residual->log_value) best = {r, "", c};
  }
  if (!best.residual && std::isinf(in.kconst.k_chi2)) best.reason = "K_chi2 is infinite";
  return best;
}

const std::vector<std::string>& residual_names() {
  static const std::vector<std::string> names = {"no_bias",       "small_bias", "large_bias", "weak_signal",
                                                 "strong_signal", "noncentral", "generic",    "mcdiarmid"};
  return names;
}

const BoundEntry* BoundReport::find(const std::string& name, Mode mode) const {
  for (const auto& e : entries)
    if (e.name == name && e.mode == mode) return &e;
  return nullptr;
}

namespace {

// Bounded differences need a bounded loss on the reachable margins; with
// Gaussian inputs that only happens when R_w = 0 and |margin| <= R_b.
ResidualResult mcdiarmid(const BoundInput& in) {
  if (in.constraints.r_w > 0.0)
    return ResidualResult::inapplicable("informational: loss unbounded on Gaussian inputs when R_w > 0");
  if (!in.loss) return ResidualResult::inapplicable("informational: loss not supplied");
  const double r_b = in.constraints.r_b;
  double sup_loss = 0.0;
  for (int i = 0; i <= 200; ++i) sup_loss = std::max(sup_loss, std::abs(loss_value(*in.loss, -r_b + 2.0 * r_b * i / 200.0)));
  const double v = sup_loss * std::sqrt(std::log(1.0 / in.delta) / (2.0 * in.n));
  return ok(Residual::from_log(safe_log(v)));
}

}  // namespace

BoundReport best_residual(const BoundInput& in, const ExpectationOptions& opt) {
  in.validate();
  BoundReport report{in, {}, 0.0, std::nullopt, "", scalar_functionals(in.model, opt), {}};
  report.rademacher_expectation_bound =
      rademacher_bound(in.loss_lipschitz, in.constraints.r_w, in.constraints.r_b, in.model.trace_second_moment(), in.n);
  for (const auto& note : in.kconst.notes) report.warnings.push_back(note);
  const ScalarFunctionals& f = report.functionals;
  for (Mode mode : {Mode::poincare, Mode::logsobolev}) {
    const BoundInput m = in.with_mode(mode);
    report.entries.push_back({"no_bias", mode, residual_no_bias(m), false});
    report.entries.push_back({"small_bias", mode, residual_small_bias(m, f), false});
    report.entries.push_back({"large_bias", mode, residual_large_bias(m, f), false});
    report.entries.push_back({"weak_signal", mode, residual_weak_signal(m, f), false});
    report.entries.push_back({"strong_signal", mode, residual_strong_signal(m, f), false});
    report.entries.push_back({"noncentral", mode, residual_noncentral(m, f), false});
    report.entries.push_back({"generic", mode, residual_generic_best(m), false});
  }
  report.entries.push_back({"mcdiarmid", Mode::poincare, mcdiarmid(in), true});
  for (const auto& e : report.entries) {
    if (e.informational || !e.result.residual) continue;
    const Residual& r = *e.result.residual;
    if (!(r.log_value < kInf)) continue;
    if (!report.best || r.log_value < report.best->residual.log_value) report.best = BestEntry{e.name, e.mode, r};
  }
  if (!report.best) report.best_reason = "no applicable residual with a finite value";
  for (const auto& e : report.entries)
    if (e.result.residual && std::isinf(e.result.residual->value) && std::isfinite(e.result.residual->log_value))
      report.warnings.push_back(e.name + " (" + to_string(e.mode) + ") overflows; only its log value is usable");
  return report;
}

}  // namespace isoperi
