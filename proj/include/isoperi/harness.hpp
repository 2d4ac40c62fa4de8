// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "isoperi/analytics.hpp"
#include "isoperi/bounds.hpp"
#include "isoperi/model.hpp"
#include "isoperi/risk.hpp"

namespace isoperi {

/// Runs fn(0..count-1) on up to `threads` workers (0 = hardware concurrency).
/// Each index is processed exactly once; results must be written by index.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

struct TrialConfig {
  ModelSpec model;
  ConstraintSet constraints;
  LossSpec loss;
  int n = 100;
  OptimizerConfig optimizer;
};

struct TrialRecord {
  int index = 0;
  std::uint64_t trial_seed = 0;
  double sup_value = 0.0;
  double norm_w = 0.0;
  double abs_b = 0.0;
  double runtime_ms = 0.0;
  bool converged = true;
  /// Non-empty when the trial threw; sup_value is then NaN.
  std::string error;
};

struct TrialBatch {
  TrialConfig config;
  std::uint64_t master_seed = 0;
  std::vector<TrialRecord> trials;
  double mean_sup = 0.0;
  double se_sup = 0.0;
  std::string created_at;
  std::string code_version;

  /// sup values of the trials that completed, in index order.
  std::vector<double> sup_values() const;
  int failures() const;
};

struct RunOptions {
  int threads = 0;
  /// Zeroes wall-clock fields so that reruns are byte-identical.
  bool reproducible = false;
};

/// Seed of trial i; depends only on (master_seed, i).
std::uint64_t trial_seed(std::uint64_t master_seed, int index);

TrialBatch run_trials(const TrialConfig& config, int trials, std::uint64_t master_seed, const RunOptions& opt = {});

struct TailCheckOptions {
  double level = 0.01;
  bool bonferroni = false;
  int min_trials = 100;
  bool allow_small_batch = false;
  /// Estimate the centre on the first half and count on the second half.
  bool split_batch = false;
  double guard_se = 2.0;
  /// Adds best residual x negative_scale at the largest delta; expected to FAIL.
  bool negative_control = false;
  double negative_scale = 0.05;
  ExpectationOptions quadrature;
};

struct TailRow {
  double delta = 0.0;
  std::string residual_name;
  double residual = 0.0;
  int exceed = 0;
  int trials = 0;
  double rate = 0.0;
  double p_value = 1.0;
  std::string verdict;
  /// PASS for genuine residuals, FAIL for the negative control.
  std::string expected;
};

struct TailCheckResult {
  std::vector<TailRow> rows;
  double centre = 0.0;
  double guard = 0.0;
  double level = 0.01;
  std::string centering;

  bool expectations_met() const;
};

/// Counts trials with sup - centre >= residual(delta) + guard, where the
/// centre is the batch mean and guard = guard_se * SE(mean). `base` must
/// carry the batch's n, R_w, R_b and loss Lipschitz constant; its delta is
/// replaced per row.
TailCheckResult tail_check(const TrialBatch& batch, const BoundInput& base, const std::vector<double>& deltas,
                           const TailCheckOptions& opt = {});

struct IndependenceOptions {
  int projections = 8;
  int permutations = 500;
  double level = 0.05;
  /// Permit theta0 != 0 (negative controls).
  bool allow_bias = false;
  int threads = 0;
};

struct IndependenceResult {
  int repetitions = 0;
  int rejections = 0;
  double rate = 0.0;
};

/// Permutation test of Z independent of Y on random projections <Z, v>,
/// statistic max_v of the standardized difference of conditional means.
IndependenceResult independence_check(const ModelSpec& model, int n, int repetitions, std::uint64_t seed,
                                      const IndependenceOptions& opt = {});

struct FIOptions {
  int family_size = 50;
  int n_mc = 100000;
  double c = 2.0;
  int batches = 50;
  int threads = 0;
};

struct FIRow {
  int fn_id = 0;
  double a = 0.0, b = 0.0, w_norm = 0.0;
  double var = 0.0, var_se = 0.0;
  double energy_p = 0.0, energy_p_se = 0.0;
  double ent = 0.0, ent_se = 0.0;
  double energy_ls = 0.0, energy_ls_se = 0.0;
  double ratio_p = 0.0, ratio_p_halfwidth = 0.0;
  double ratio_ls = 0.0, ratio_ls_halfwidth = 0.0;
  std::string verdict;
};

struct FICheckResult {
  std::vector<FIRow> rows;
  KConstants k;
  double c = 2.0;
  double c_star = 2.0;
  int passes = 0;
};

/// Monte-Carlo check of Var f <= E Gamma_P f and Ent f^2 <= 2 E Gamma_LS f on
/// f(z, y) = a tanh(<z, w> + y b) under the law of (Z, Y) = (Y X, Y).
FICheckResult fi_check(const ModelSpec& model, const KConstants& k, const FIOptions& opt, std::uint64_t seed);

struct SweepTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::map<std::string, double> summary;
  std::vector<std::string> notes;
};

struct EffectiveRankPreset {
  int dim = 40;
  std::vector<double> dstar{1.0, 2.0, 4.0, 8.0, 16.0};
  std::vector<int> ns{50, 200, 800};
  int trials = 100;
  double theta0 = 0.0;
  double theta1_norm = 1.0;
  double r_w = 1.0;
  double r_b = 0.5;
  double delta = 0.1;
  LossSpec loss = LossSpec::logistic();
  OptimizerConfig optimizer;
  int threads = 0;
};

struct ProportionalPreset {
  std::vector<int> sizes{50, 100, 200};
  int trials = 300;
  double r1 = 1.0;
  double r_b = 0.0;
  double theta0 = 0.0;
  /// theta1 = scale * (1, ..., 1), so <theta1, Sigma theta1> = scale^2 for every d.
  double theta1_scale = 1.0;
  double delta = 0.1;
  LossSpec loss = LossSpec::logistic();
  OptimizerConfig optimizer;
  int threads = 0;
};

/// Diagonal Sigma with eigenvalues rho^k (lambda_max = 1) and tr Sigma = d*;
/// d* = 1 uses the one-dimensional model.
SweepTable effective_rank_sweep(const EffectiveRankPreset& preset, std::uint64_t seed);

/// d = n with Sigma = I/d and R_w = sqrt(d) R_1, so K_LS R_w^2 = R_1^2.
SweepTable proportional_sweep(const ProportionalPreset& preset, std::uint64_t seed);

/// Geometric ratio rho with sum_{k<dim} rho^k = dstar.
double geometric_ratio_for_rank(int dim, double dstar);

}  // namespace isoperi
