// SPDX-License-Identifier: Apache-2.0
#include "isoperi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "isoperi/errors.hpp"
#include "isoperi/rng.hpp"
#include "isoperi/stats.hpp"
#include "isoperi/version.hpp"

namespace isoperi {

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<double> TrialBatch::sup_values() const {
  std::vector<double> v;
  v.reserve(trials.size());
  for (const auto& t : trials)
    if (t.error.empty()) v.push_back(t.sup_value);
  return v;
}

int TrialBatch::failures() const {
  return static_cast<int>(std::count_if(trials.begin(), trials.end(), [](const TrialRecord& t) { return !t.error.empty(); }));
}

std::uint64_t trial_seed(std::uint64_t master_seed, int index) {
  return RandomStream(master_seed, 0x7121A1).substream(static_cast<std::uint64_t>(index)).next_u64();
}

namespace {

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

TrialBatch run_trials(const TrialConfig& config, int trials, std::uint64_t master_seed, const RunOptions& opt) {
  if (trials <= 0) throw ConfigError("trial count must be positive");
  if (config.n <= 0) throw ConfigError("n must be positive");
  config.constraints.validate();
  config.optimizer.validate();
  TrialBatch batch{config, master_seed, std::vector<TrialRecord>(trials), 0.0, 0.0,
                   opt.reproducible ? std::string() : utc_now(), kVersion};
  parallel_for(trials, opt.threads, [&](int i) {
    TrialRecord& rec = batch.trials[i];
    rec.index = i;
    rec.trial_seed = trial_seed(master_seed, i);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Dataset data = sample_dataset(config.model, config.n, rec.trial_seed);
      const SupResult r = sup_gap(data, config.model, config.loss, config.constraints, config.optimizer,
                                  splitmix64(rec.trial_seed ^ 0xC0FFEE));
      rec.sup_value = r.value;
      rec.norm_w = r.argmax_w.norm();
      rec.abs_b = std::abs(r.argmax_b);
      rec.converged = r.converged;
    } catch (const std::exception& e) {
      rec.sup_value = std::numeric_limits<double>::quiet_NaN();
      rec.converged = false;
      rec.error = e.what();
      if (rec.error.empty()) rec.error = "unknown failure";
    }
    if (!opt.reproducible)
      rec.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });
  const std::vector<double> values = batch.sup_values();
  batch.mean_sup = mean(values);
  batch.se_sup = standard_error(values);
  return batch;
}

bool TailCheckResult::expectations_met() const {
  return std::all_of(rows.begin(), rows.end(), [](const TailRow& r) { return r.verdict == r.expected; });
}

TailCheckResult tail_check(const TrialBatch& batch, const BoundInput& base, const std::vector<double>& deltas,
                           const TailCheckOptions& opt) {
  if (deltas.empty()) throw ConfigError("tail_check needs at least one delta");
  for (double d : deltas)
    if (!(d > 0.0 && d <= 1.0)) throw ConfigError("tail_check deltas must lie in (0, 1]");
  if (base.n != batch.config.n || base.constraints.r_w != batch.config.constraints.r_w ||
      base.constraints.r_b != batch.config.constraints.r_b || base.loss_lipschitz != batch.config.loss.lipschitz)
    throw ConfigError("tail_check: bound input does not match the batch (n, R_w, R_b, L)");
  const std::vector<double> values = batch.sup_values();
  const int m_all = static_cast<int>(values.size());
  if (m_all < opt.min_trials && !opt.allow_small_batch)
    throw ConfigError("tail_check refuses " + std::to_string(m_all) + " trials (< " + std::to_string(opt.min_trials) +
                      "); set allow_small_batch to override");

  TailCheckResult out;
  out.level = opt.level;
  std::vector<double> counted = values;
  if (opt.split_batch) {
    const std::size_t half = values.size() / 2;
    const std::vector<double> first(values.begin(), values.begin() + half);
    counted.assign(values.begin() + half, values.end());
    out.centre = mean(first);
    out.guard = opt.guard_se * standard_error(first);
    out.centering = "split_batch: centre = mean of first half, exceedances counted on second half";
  } else {
    out.centre = mean(values);
    out.guard = opt.guard_se * standard_error(values);
    out.centering = "batch_mean_plus_guard: centre = batch mean, threshold inflated by " +
                    std::to_string(opt.guard_se) + " * SE(mean) (conservative)";
  }
  const int m = static_cast<int>(counted.size());

  const auto count_row = [&](double delta, const std::string& name, double residual, const std::string& expected) {
    TailRow row;
    row.delta = delta;
    row.residual_name = name;
    row.residual = residual;
    row.trials = m;
    const double threshold = residual + out.guard;
    for (double v : counted)
      if (v - out.centre >= threshold) ++row.exceed;
    row.rate = m > 0 ? static_cast<double>(row.exceed) / m : 0.0;
    row.p_value = binomial_upper_tail(row.exceed, m, delta);
    row.expected = expected;
    return row;
  };

  std::vector<double> sorted = deltas;
  const double largest = *std::max_element(sorted.begin(), sorted.end());
  for (double delta : deltas) {
    const BoundReport report = best_residual(base.with_delta(delta), opt.quadrature);
    for (const BoundEntry& e : report.entries) {
      if (e.informational || !e.result.applicable()) continue;
      out.rows.push_back(count_row(delta, e.name + "/" + to_string(e.mode), e.result.residual->value, "PASS"));
    }
    if (report.best) {
      out.rows.push_back(count_row(delta, "best", report.best->residual.value, "PASS"));
      if (opt.negative_control && delta == largest)
        out.rows.push_back(count_row(delta, "negative_control", opt.negative_scale * report.best->residual.value,
                                     "FAIL"));
    }
  }
  const int genuine = static_cast<int>(std::count_if(out.rows.begin(), out.rows.end(),
                                                     [](const TailRow& r) { return r.expected == "PASS"; }));
  const double alpha = opt.bonferroni && genuine > 0 ? opt.level / genuine : opt.level;
  for (TailRow& r : out.rows) r.verdict = r.p_value < alpha ? "FAIL" : "PASS";
  return out;
}

IndependenceResult independence_check(const ModelSpec& model, int n, int repetitions, std::uint64_t seed,
                                      const IndependenceOptions& opt) {
  if (model.theta0() != 0.0 && !opt.allow_bias)
    throw ConfigError("independence_check requires theta0 = 0 (set allow_bias for negative controls)");
  if (n < 2 || repetitions <= 0) throw ConfigError("independence_check needs n >= 2 and repetitions > 0");
  if (opt.projections <= 0 || opt.permutations <= 0) throw ConfigError("projections and permutations must be positive");
  const int d = model.dim();
  std::vector<char> rejected(repetitions, 0);
  parallel_for(repetitions, opt.threads, [&](int rep) {
    RandomStream rng(seed, 0x1DE9);
    RandomStream local = rng.substream(static_cast<std::uint64_t>(rep));
    const Dataset data = sample_dataset(model, n, local.next_u64());
    const Matrix z = data.y.asDiagonal() * data.x;
    Matrix v(d, opt.projections);
    for (int j = 0; j < opt.projections; ++j) {
      for (int k = 0; k < d; ++k) v(k, j) = local.normal();
      v.col(j).normalize();
    }
    const Matrix proj = z * v;  // n x projections
    std::vector<double> scale(opt.projections);
    for (int j = 0; j < opt.projections; ++j) {
      const double mu = proj.col(j).mean();
      const double var = (proj.col(j).array() - mu).square().sum() / (n - 1);
      scale[j] = std::sqrt(std::max(var, 0.0));
    }
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = data.y[i] > 0.0 ? 1 : -1;
    const int n_plus = static_cast<int>(std::count(labels.begin(), labels.end(), 1));
    const int n_minus = n - n_plus;
    if (n_plus == 0 || n_minus == 0) return;
    const double pooled = std::sqrt(1.0 / n_plus + 1.0 / n_minus);
    const auto statistic = [&](const std::vector<int>& lab) {
      double best = 0.0;
      for (int j = 0; j < opt.projections; ++j) {
        if (scale[j] == 0.0) continue;
        double sp = 0.0, sm = 0.0;
        for (int i = 0; i < n; ++i) (lab[i] > 0 ? sp : sm) += proj(i, j);
        const double diff = sp / n_plus - sm / n_minus;
        best = std::max(best, std::abs(diff) / (scale[j] * pooled));
      }
      return best;
    };
    const double observed = statistic(labels);
    int at_least = 0;
    std::vector<int> perm = labels;
    for (int p = 0; p < opt.permutations; ++p) {
      for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[local.below(static_cast<std::uint64_t>(i) + 1)]);
      if (statistic(perm) >= observed) ++at_least;
    }
    const double p_value = (1.0 + at_least) / (1.0 + opt.permutations);
    rejected[rep] = p_value <= opt.level;
  });
  IndependenceResult r;
  r.repetitions = repetitions;
  r.rejections = static_cast<int>(std::count(rejected.begin(), rejected.end(), 1));
  r.rate = static_cast<double>(r.rejections) / repetitions;
  return r;
}

namespace {

double entropy_of_square(const Eigen::ArrayXd& f2) {
  const double m = f2.mean();
  if (m <= 0.0) return 0.0;
  double s = 0.0;
  for (Eigen::Index i = 0; i < f2.size(); ++i)
    if (f2[i] > 0.0) s += f2[i] * std::log(f2[i]);
  return s / static_cast<double>(f2.size()) - m * std::log(m);
}

double sample_variance(const Eigen::ArrayXd& f) {
  if (f.size() < 2) return 0.0;
  return (f - f.mean()).square().sum() / static_cast<double>(f.size() - 1);
}

// coefficient * energy with the convention inf * 0 = 0.
Eigen::ArrayXd scaled(double coefficient, const Eigen::ArrayXd& energy) {
  if (std::isinf(coefficient))
    return energy.unaryExpr([](double e) { return e > 0.0 ? std::numeric_limits<double>::infinity() : 0.0; });
  return coefficient * energy;
}

double relative_se(double value, double se) {
  if (value == 0.0) return se == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  if (!std::isfinite(value)) return 0.0;
  return se / std::abs(value);
}

}  // namespace

FICheckResult fi_check(const ModelSpec& model, const KConstants& k, const FIOptions& opt, std::uint64_t seed) {
  if (opt.family_size <= 0 || opt.n_mc < 2) throw ConfigError("fi_check needs family_size > 0 and n_mc >= 2");
  if (!(opt.c > 1.0)) throw ConfigError("fi_check: c must exceed 1");
  if (opt.batches < 2 || opt.batches > opt.n_mc) throw ConfigError("fi_check: batches must lie in [2, n_mc]");
  FICheckResult out;
  out.k = k;
  out.c = opt.c;
  out.c_star = std::isinf(opt.c) ? 1.0 : opt.c / (opt.c - 1.0);
  const int d = model.dim();
  RandomStream root(seed, 0xF1);
  RandomStream sample_stream = root.substream(1);
  const Dataset data = sample_dataset(model, opt.n_mc, sample_stream.next_u64());
  const Matrix z = data.y.asDiagonal() * data.x;
  const Eigen::ArrayXd y = data.y.array();

  // Gamma_P = alpha Gamma_Z + beta Gamma_Y; Gamma_LS = kappa Gamma_P + 2 K_LS Gamma_Z.
  const double chi_term = k.k_chi2 == 0.0 ? 1.0 : 1.0 + opt.c * k.k_chi2;
  const double alpha = k.k_p * chi_term;
  const double beta = out.c_star * k.k_v;
  const double kappa = 1.0 + 0.5 * std::log(k.k_u);

  struct Fn {
    Vector w;
    double a, b;
  };
  std::vector<Fn> family(opt.family_size);
  RandomStream fn_stream = root.substream(2);
  for (auto& f : family) {
    Vector w(d);
    for (int i = 0; i < d; ++i) w[i] = fn_stream.normal();
    w *= (0.2 + 1.8 * fn_stream.uniform()) / std::max(w.norm(), 1e-300);
    f.w = w;
    f.b = -2.0 + 4.0 * fn_stream.uniform();
    f.a = (0.5 + 1.5 * fn_stream.uniform()) * (fn_stream.uniform() < 0.5 ? -1.0 : 1.0);
  }

  out.rows.resize(opt.family_size);
  const int per_batch = opt.n_mc / opt.batches;
  parallel_for(opt.family_size, opt.threads, [&](int j) {
    const Fn& fn = family[j];
    const Eigen::ArrayXd u = (z * fn.w).array();
    const Eigen::ArrayXd th = (u + y * fn.b).tanh();
    const Eigen::ArrayXd f = fn.a * th;
    const Eigen::ArrayXd f_flip = fn.a * (u - y * fn.b).tanh();
    const Eigen::ArrayXd grad_y = 0.5 * (f - f_flip);
    const Eigen::ArrayXd gamma_y = grad_y.square();
    const Eigen::ArrayXd gamma_z = fn.a * fn.a * (1.0 - th.square()).square() * fn.w.squaredNorm();
    const Eigen::ArrayXd gamma_p = scaled(alpha, gamma_z) + scaled(beta, gamma_y);
    const Eigen::ArrayXd gamma_ls = scaled(kappa, gamma_p) + scaled(2.0 * k.k_ls, gamma_z);
    const Eigen::ArrayXd f2 = f.square();

    std::vector<double> bv, bp, be, bl;
    for (int bi = 0; bi < opt.batches; ++bi) {
      const Eigen::Index start = static_cast<Eigen::Index>(bi) * per_batch;
      bv.push_back(sample_variance(f.segment(start, per_batch)));
      bp.push_back(gamma_p.segment(start, per_batch).mean());
      be.push_back(entropy_of_square(f2.segment(start, per_batch)));
      bl.push_back(gamma_ls.segment(start, per_batch).mean());
    }
    FIRow& row = out.rows[j];
    row.fn_id = j;
    row.a = fn.a;
    row.b = fn.b;
    row.w_norm = fn.w.norm();
    row.var = sample_variance(f);
    row.energy_p = gamma_p.mean();
    row.ent = entropy_of_square(f2);
    row.energy_ls = gamma_ls.mean();
    row.var_se = standard_error(bv);
    row.energy_p_se = standard_error(bp);
    row.ent_se = standard_error(be);
    row.energy_ls_se = standard_error(bl);

    const double rel_p = std::hypot(relative_se(row.var, row.var_se), relative_se(row.energy_p, row.energy_p_se));
    const double rel_ls = std::hypot(relative_se(row.ent, row.ent_se), relative_se(row.energy_ls, row.energy_ls_se));
    row.ratio_p = row.energy_p > 0.0 ? row.var / row.energy_p : (row.var > 0.0 ? INFINITY : 0.0);
    row.ratio_ls = row.energy_ls > 0.0 ? row.ent / (2.0 * row.energy_ls) : (row.ent > 0.0 ? INFINITY : 0.0);
    row.ratio_p_halfwidth = 3.0 * row.ratio_p * rel_p;
    row.ratio_ls_halfwidth = 3.0 * row.ratio_ls * rel_ls;
    const bool pass_p = row.var <= row.energy_p * (1.0 + 3.0 * rel_p);
    const bool pass_ls = row.ent <= 2.0 * row.energy_ls * (1.0 + 3.0 * rel_ls);
    row.verdict = pass_p && pass_ls ? "PASS" : "FAIL";
  });
  out.passes = static_cast<int>(
      std::count_if(out.rows.begin(), out.rows.end(), [](const FIRow& r) { return r.verdict == "PASS"; }));
  return out;
}

double geometric_ratio_for_rank(int dim, double dstar) {
  if (dim < 1) throw ConfigError("dimension must be positive");
  if (!(dstar >= 1.0 && dstar <= dim)) throw ConfigError("effective rank must lie in [1, dim]");
  if (dstar == dim) return 1.0;
  const auto total = [&](double rho) {
    double s = 0.0, p = 1.0;
    for (int k = 0; k < dim; ++k, p *= rho) s += p;
    return s;
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (total(mid) < dstar ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

double best_residual_value(const BoundReport& r) {
  return r.best ? r.best->residual.value : std::numeric_limits<double>::infinity();
}

}  // namespace

SweepTable effective_rank_sweep(const EffectiveRankPreset& preset, std::uint64_t seed) {
  SweepTable t;
  t.name = "effective_rank";
  t.columns = {"dstar", "dim", "n", "mean_sup", "se_sup", "rademacher", "residual", "mean_sup_over_rademacher"};
  std::vector<double> ratio_x, mean_y;
  int row_id = 0;
  for (double dstar : preset.dstar) {
    const bool rank_one = dstar <= 1.0;
    const int dim = rank_one ? 1 : preset.dim;
    CovarianceSpec cov = SphericalCov{1.0};
    if (!rank_one) {
      const double rho = geometric_ratio_for_rank(dim, dstar);
      Vector diag(dim);
      double p = 1.0;
      for (int k = 0; k < dim; ++k, p *= rho) diag[k] = p;
      cov = DiagonalCov{diag};
    }
    Vector theta1 = Vector::Zero(dim);
    theta1[0] = preset.theta1_norm;
    const ModelSpec model(cov, theta1, preset.theta0, LinkKind::logistic());
    const KConstants k = k_constants(model, KRequest{});
    for (int n : preset.ns) {
      BoundInput in{model, {preset.r_w, preset.r_b}, preset.loss.lipschitz, n, preset.delta, k, Mode::logsobolev,
                    preset.loss};
      const BoundReport report = best_residual(in);
      const double rad = rademacher_bound(preset.loss.lipschitz, preset.r_w, preset.r_b, model.trace_second_moment(), n);
      TrialConfig tc{model, {preset.r_w, preset.r_b}, preset.loss, n, preset.optimizer};
      const TrialBatch batch = run_trials(tc, preset.trials, trial_seed(seed, 1000 + row_id), {preset.threads, true});
      const double dstar_actual = model.covariance().trace() / model.covariance().lambda_max();
      t.rows.push_back({dstar_actual, static_cast<double>(dim), static_cast<double>(n), batch.mean_sup, batch.se_sup,
                        rad, best_residual_value(report), batch.mean_sup / rad});
      ratio_x.push_back(dstar_actual / n);
      mean_y.push_back(batch.mean_sup);
      ++row_id;
    }
  }
  if (ratio_x.size() >= 2) t.summary["spearman_dstar_over_n_vs_mean_sup"] = spearman(ratio_x, mean_y);
  t.notes.push_back("residual is the best Poincare/log-Sobolev residual; it does not depend on dstar at fixed lambda_max");
  t.notes.push_back("mean_sup <= rademacher is the expectation bound; mean_sup should fall as dstar/n -> 0");
  return t;
}

SweepTable proportional_sweep(const ProportionalPreset& preset, std::uint64_t seed) {
  SweepTable t;
  t.name = "proportional";
  t.columns = {"d", "n", "mean_sup", "se_sup", "rademacher", "residual", "residual_no_bias_logsobolev"};
  std::vector<double> log_n, log_r, means, ses;
  int row_id = 0;
  for (int size : preset.sizes) {
    const double r_w = std::sqrt(static_cast<double>(size)) * preset.r1;
    const Vector theta1 = Vector::Constant(size, preset.theta1_scale);
    const ModelSpec model(SphericalCov{1.0 / size}, theta1, preset.theta0, LinkKind::logistic());
    const KConstants k = k_constants(model, KRequest{});
    BoundInput in{model, {r_w, preset.r_b}, preset.loss.lipschitz, size, preset.delta, k, Mode::logsobolev,
                  preset.loss};
    const BoundReport report = best_residual(in);
    const BoundEntry* nb = report.find("no_bias", Mode::logsobolev);
    const double nb_value = nb && nb->result.applicable() ? nb->result.residual->value : NAN;
    const double rad = rademacher_bound(preset.loss.lipschitz, r_w, preset.r_b, model.trace_second_moment(), size);
    double m = 0.0, se = 0.0;
    if (r_w > 0.0 || preset.r_b > 0.0) {
      TrialConfig tc{model, {r_w, preset.r_b}, preset.loss, size, preset.optimizer};
      const TrialBatch batch = run_trials(tc, preset.trials, trial_seed(seed, 2000 + row_id), {preset.threads, true});
      m = batch.mean_sup;
      se = batch.se_sup;
    }
    const double res = best_residual_value(report);
    t.rows.push_back({static_cast<double>(size), static_cast<double>(size), m, se, rad, res, nb_value});
    if (res > 0.0 && std::isfinite(res)) {
      log_n.push_back(std::log(static_cast<double>(size)));
      log_r.push_back(std::log(res));
    }
    means.push_back(m);
    ses.push_back(se);
    ++row_id;
  }
  if (log_n.size() >= 2) t.summary["residual_loglog_slope"] = linear_fit(log_n, log_r).slope;
  if (!means.empty()) {
    const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
    t.summary["mean_sup_spread"] = *hi - *lo;
    t.summary["min_3se"] = 3.0 * *std::min_element(ses.begin(), ses.end());
  }
  t.notes.push_back("Sigma = I/d, R_w = sqrt(d) R_1, K_LS = 1/d; residual expected Theta(n^-1/2), mean_sup Omega(1)");
  return t;
}

}  // namespace isoperi
