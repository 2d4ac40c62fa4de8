// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isoperi/analytics.hpp"
#include "isoperi/harness.hpp"
#include "isoperi/risk.hpp"
#include "isoperi/serialize.hpp"

namespace isoperi::cli {

struct RunConfig {
  ModelSpec model;
  ConstraintSet constraints;
  LossSpec loss = LossSpec::logistic();
  int n = 200;
  int trials = 200;
  std::vector<double> deltas{0.5, 0.2, 0.1, 0.05};
  OptimizerConfig optimizer;
  KRequest k;
  /// Set when a KLS strategy ran without an explicit constant.
  bool c_kls_defaulted = false;
  TailCheckOptions tail;
  FIOptions fi;
  EffectiveRankPreset effective_rank;
  ProportionalPreset proportional;
  int oracle_instances = 20;
  int oracle_resolution = 101;
  std::string output_dir = "isoperi_out";
  std::uint64_t master_seed = 1;
  int threads = 0;
  bool reproducible = false;
};

/// The built-in default configuration as JSON (d = 5, Sigma = I/5, logistic).
Json default_config_json();

/// Sets a dotted path, e.g. "model.theta0=0.5"; the value is parsed as JSON
/// when possible and kept as a string otherwise.
void apply_set(Json& config, const std::string& assignment);

RunConfig parse_run_config(const Json& config);

/// Entry point; returns the process exit code (0 ok, 1 check failed, 2 config error).
int run(int argc, char** argv);

}  // namespace isoperi::cli
