// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fmt/core.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "isoperi/bounds.hpp"
#include "isoperi/errors.hpp"
#include "isoperi/rng.hpp"
#include "isoperi/svg.hpp"

namespace isoperi::cli {

namespace fs = std::filesystem;

Json default_config_json() {
  return Json::parse(R"({
    "model": {
      "dim": 5,
      "covariance": {"kind": "spherical", "s": 0.2},
      "theta1": [1, 0, 0, 0, 0],
      "theta0": 0.0,
      "link": "logistic"
    },
    "constraints": {"r_w": 1.0, "r_b": 0.5},
    "loss": "logistic_loss",
    "n": 200,
    "trials": 200,
    "deltas": [0.5, 0.2, 0.1, 0.05],
    "optimizer": {},
    "k": {"strategy_p": "bakry_emery", "strategy_ls": "bakry_emery"},
    "tail": {"level": 0.01, "bonferroni": false, "split_batch": false, "guard_se": 2.0,
             "min_trials": 100, "allow_small_batch": false, "negative_scale": 0.05},
    "fi": {"family_size": 50, "n_mc": 100000, "c": 2.0, "batches": 50},
    "sweep": {
      "effective_rank": {"dim": 40, "dstar": [1, 2, 4, 8, 16], "ns": [50, 200, 800], "trials": 100},
      "proportional": {"sizes": [50, 100, 200], "trials": 300, "r1": 1.0, "r_b": 0.0}
    },
    "oracle": {"instances": 20, "resolution": 101},
    "output_dir": "isoperi_out",
    "master_seed": 1
  })");
}

void apply_set(Json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  Json* node = &config;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("--set: empty path component in '" + path + "'");
    if (!node->is_object()) throw ConfigError("--set: '" + path + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

namespace {

template <class T>
T field(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

const Json& sub(const Json& j, const char* key) {
  static const Json empty = Json::object();
  return j.is_object() && j.contains(key) && !j.at(key).is_null() ? j.at(key) : empty;
}

}  // namespace

RunConfig parse_run_config(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c{model_from_json(sub(j, "model"))};
  c.constraints = constraints_from_json(sub(j, "constraints"));
  if (j.contains("loss")) c.loss = loss_from_json(j.at("loss"));
  c.n = field(j, "n", c.n);
  c.trials = field(j, "trials", c.trials);
  c.deltas = field(j, "deltas", c.deltas);
  for (double d : c.deltas)
    if (!(d > 0.0 && d <= 1.0)) throw ConfigError("deltas must lie in (0, 1]");
  if (c.n <= 0) throw ConfigError("n must be positive");
  if (c.trials <= 0) throw ConfigError("trials must be positive");
  c.optimizer = optimizer_from_json(sub(j, "optimizer"));

  const Json& k = sub(j, "k");
  c.k.strategy_p = parse_strategy(field<std::string>(k, "strategy_p", "bakry_emery"));
  c.k.strategy_ls = parse_strategy(field<std::string>(k, "strategy_ls", "bakry_emery"));
  if (k.contains("c_kls_user") && !k.at("c_kls_user").is_null()) c.k.c_kls_user = k.at("c_kls_user").get<double>();
  if (k.contains("k_p") && !k.at("k_p").is_null()) c.k.k_p_override = k.at("k_p").get<double>();
  if (k.contains("k_ls") && !k.at("k_ls").is_null()) c.k.k_ls_override = k.at("k_ls").get<double>();
  const bool kls = c.k.strategy_p == KStrategy::kls_sqrt_log || c.k.strategy_p == KStrategy::kls_trace;
  if (kls && !c.k.c_kls_user) {
    c.k.c_kls_user = 1.0;
    c.c_kls_defaulted = true;
  }

  const Json& t = sub(j, "tail");
  c.tail.level = field(t, "level", c.tail.level);
  c.tail.bonferroni = field(t, "bonferroni", c.tail.bonferroni);
  c.tail.split_batch = field(t, "split_batch", c.tail.split_batch);
  c.tail.guard_se = field(t, "guard_se", c.tail.guard_se);
  c.tail.min_trials = field(t, "min_trials", c.tail.min_trials);
  c.tail.allow_small_batch = field(t, "allow_small_batch", c.tail.allow_small_batch);
  c.tail.negative_scale = field(t, "negative_scale", c.tail.negative_scale);

  const Json& f = sub(j, "fi");
  c.fi.family_size = field(f, "family_size", c.fi.family_size);
  c.fi.n_mc = field(f, "n_mc", c.fi.n_mc);
  c.fi.c = field(f, "c", c.fi.c);
  c.fi.batches = field(f, "batches", c.fi.batches);

  const Json& sw = sub(j, "sweep");
  const Json& er = sub(sw, "effective_rank");
  c.effective_rank.dim = field(er, "dim", c.effective_rank.dim);
  c.effective_rank.dstar = field(er, "dstar", c.effective_rank.dstar);
  c.effective_rank.ns = field(er, "ns", c.effective_rank.ns);
  c.effective_rank.trials = field(er, "trials", c.effective_rank.trials);
  c.effective_rank.theta0 = field(er, "theta0", c.effective_rank.theta0);
  c.effective_rank.theta1_norm = field(er, "theta1_norm", c.effective_rank.theta1_norm);
  c.effective_rank.r_w = field(er, "r_w", c.effective_rank.r_w);
  c.effective_rank.r_b = field(er, "r_b", c.effective_rank.r_b);
  c.effective_rank.delta = field(er, "delta", c.effective_rank.delta);
  c.effective_rank.loss = c.loss;
  c.effective_rank.optimizer = c.optimizer;
  const Json& pr = sub(sw, "proportional");
  c.proportional.sizes = field(pr, "sizes", c.proportional.sizes);
  c.proportional.trials = field(pr, "trials", c.proportional.trials);
  c.proportional.r1 = field(pr, "r1", c.proportional.r1);
  c.proportional.r_b = field(pr, "r_b", c.proportional.r_b);
  c.proportional.theta0 = field(pr, "theta0", c.proportional.theta0);
  c.proportional.theta1_scale = field(pr, "theta1_scale", c.proportional.theta1_scale);
  c.proportional.delta = field(pr, "delta", c.proportional.delta);
  c.proportional.loss = c.loss;
  c.proportional.optimizer = c.optimizer;

  const Json& o = sub(j, "oracle");
  c.oracle_instances = field(o, "instances", c.oracle_instances);
  c.oracle_resolution = field(o, "resolution", c.oracle_resolution);
  c.output_dir = field<std::string>(j, "output_dir", c.output_dir);
  c.master_seed = field<std::uint64_t>(j, "master_seed", c.master_seed);
  c.threads = field(j, "threads", c.threads);
  c.reproducible = field(j, "reproducible", c.reproducible);
  return c;
}

namespace {

void setup_logging() {
  auto logger = spdlog::get("isoperi");
  if (!logger) logger = spdlog::stderr_logger_mt("isoperi");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("ISOPERI_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else spdlog::set_level(spdlog::level::info);
}

void prepare_output(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  const fs::path probe = fs::path(dir) / ".isoperi_write_probe";
  write_text(probe.string(), "");
  fs::remove(probe, ec);
}

std::string out_path(const RunConfig& c, const std::string& name) { return (fs::path(c.output_dir) / name).string(); }

KConstants constants_for(const RunConfig& c) {
  if (c.c_kls_defaulted)
    spdlog::warn("KLS strategy without c_kls_user: using c_kls_user = 1.0 (UNVERIFIED absolute constant)");
  KConstants k = k_constants(c.model, c.k);
  if (c.c_kls_defaulted) k.notes.push_back("DEFAULTED c_kls_user = 1.0: the KLS absolute constant is not known");
  for (const auto& note : k.notes) spdlog::warn("{}", note);
  return k;
}

BoundInput bound_input(const RunConfig& c, const KConstants& k, double delta) {
  return BoundInput{c.model, c.constraints, c.loss.lipschitz, c.n, delta, k, Mode::logsobolev, c.loss};
}

std::string cell(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.6g}", v);
}

int cmd_bounds(const RunConfig& c) {
  const KConstants k = constants_for(c);
  const double delta = c.deltas.empty() ? 0.1 : c.deltas.back();
  const BoundReport report = best_residual(bound_input(c, k, delta));
  write_text(out_path(c, "bounds.json"), to_json(report).dump(2) + "\n");
  fmt::print("delta = {}  n = {}  R_w = {}  R_b = {}  L = {}\n", cell(delta), c.n, cell(c.constraints.r_w),
             cell(c.constraints.r_b), cell(c.loss.lipschitz));
  fmt::print("K_P = {}  K_LS = {}  K_chi2 = {}  K_V = {}  K_U = {}\n", cell(k.k_p), cell(k.k_ls), cell(k.k_chi2),
             cell(k.k_v), cell(k.k_u));
  fmt::print("{:<14} {:<11} {}\n", "residual", "mode", "value");
  for (const BoundEntry& e : report.entries) {
    const std::string value = e.result.applicable() ? cell(e.result.residual->value) : "inapplicable: " + e.result.reason;
    fmt::print("{:<14} {:<11} {}{}\n", e.name, to_string(e.mode), value, e.informational ? "  (informational)" : "");
  }
  fmt::print("rademacher expectation bound: {}\n", cell(report.rademacher_expectation_bound));
  if (report.best)
    fmt::print("best: {} ({}) = {}\n", report.best->name, to_string(report.best->mode),
               cell(report.best->residual.value));
  else
    fmt::print("best: none ({})\n", report.best_reason);
  for (const auto& w : report.warnings) spdlog::warn("{}", w);
  return 0;
}

std::string tail_svg(const TrialBatch& batch, const TailCheckResult& tail, const RunConfig& c, const KConstants& k) {
  SvgChart chart;
  chart.title = "Tail of sup - mean against the residual envelope";
  chart.x_label = "t";
  chart.y_label = "P(sup - mean >= t)";
  SvgSeries emp = empirical_tail(batch.sup_values(), tail.centre, "empirical");
  emp.color = "#1f77b4";
  chart.series.push_back(emp);
  SvgSeries env;
  env.label = "guard + best residual(delta)";
  env.color = "#d62728";
  env.dashed = true;
  for (int i = 0; i <= 30; ++i) {
    const double delta = std::pow(10.0, -3.0 + 3.0 * i / 30.0);
    const BoundReport r = best_residual(bound_input(c, k, delta));
    if (!r.best || !std::isfinite(r.best->residual.value)) continue;
    env.x.push_back(r.best->residual.value + tail.guard);
    env.y.push_back(delta);
  }
  chart.series.push_back(env);
  return render_svg(chart);
}

int cmd_verify(const RunConfig& c, bool negative_control) {
  const KConstants k = constants_for(c);
  const TrialConfig tc{c.model, c.constraints, c.loss, c.n, c.optimizer};
  spdlog::info("running {} trials (n = {}, d = {})", c.trials, c.n, c.model.dim());
  const TrialBatch batch = run_trials(tc, c.trials, c.master_seed, {c.threads, c.reproducible});
  if (batch.failures() > 0) spdlog::warn("{} trial(s) failed; see the batch file", batch.failures());
  TailCheckOptions topt = c.tail;
  topt.negative_control = negative_control;
  const TailCheckResult tail = tail_check(batch, bound_input(c, k, 0.1), c.deltas, topt);
  write_batch_jsonl(batch, out_path(c, "batch.jsonl"));
  write_text(out_path(c, "tail.csv"), tail_to_csv(tail));
  write_text(out_path(c, "tail.svg"), tail_svg(batch, tail, c, k));
  fmt::print("mean_sup = {}  se = {}  centre = {}  guard = {}\n", cell(batch.mean_sup), cell(batch.se_sup),
             cell(tail.centre), cell(tail.guard));
  fmt::print("{:<6} {:<28} {:>12} {:>7} {:>6} {:>9} {:>10} {}\n", "delta", "residual", "value", "exceed", "M", "rate",
             "pvalue", "verdict");
  for (const TailRow& r : tail.rows)
    fmt::print("{:<6} {:<28} {:>12} {:>7} {:>6} {:>9} {:>10} {}{}\n", cell(r.delta), r.residual_name,
               cell(r.residual), r.exceed, r.trials, cell(r.rate), cell(r.p_value), r.verdict,
               r.expected == "FAIL" ? " (negative control, expected FAIL)" : "");
  return tail.expectations_met() ? 0 : 1;
}

int cmd_fi_check(const RunConfig& c) {
  const KConstants k = constants_for(c);
  FIOptions opt = c.fi;
  opt.threads = c.threads;
  const FICheckResult r = fi_check(c.model, k, opt, c.master_seed);
  write_text(out_path(c, "fi.csv"), fi_to_csv(r));
  write_text(out_path(c, "fi.json"), to_json(r).dump(2) + "\n");
  fmt::print("{:<5} {:>12} {:>12} {:>12} {:>12} {}\n", "fn", "Var/EG_P", "+-", "Ent/2EG_LS", "+-", "verdict");
  for (const FIRow& row : r.rows)
    fmt::print("{:<5} {:>12} {:>12} {:>12} {:>12} {}\n", row.fn_id, cell(row.ratio_p), cell(row.ratio_p_halfwidth),
               cell(row.ratio_ls), cell(row.ratio_ls_halfwidth), row.verdict);
  const int failures = static_cast<int>(r.rows.size()) - r.passes;
  fmt::print("passed {}/{}\n", r.passes, r.rows.size());
  return failures <= 2 ? 0 : 1;
}

int cmd_sweep(const RunConfig& c, const std::string& which) {
  SweepTable t;
  if (which == "effective-rank") {
    EffectiveRankPreset p = c.effective_rank;
    p.threads = c.threads;
    t = effective_rank_sweep(p, c.master_seed);
  } else if (which == "proportional") {
    ProportionalPreset p = c.proportional;
    p.threads = c.threads;
    t = proportional_sweep(p, c.master_seed);
  } else {
    throw ConfigError("sweep must be 'effective-rank' or 'proportional'");
  }
  const std::string stem = which == "proportional" ? "sweep_proportional" : "sweep_effective_rank";
  write_text(out_path(c, stem + ".csv"), sweep_to_csv(t));
  write_text(out_path(c, stem + ".json"), to_json(t).dump(2) + "\n");
  for (const auto& col : t.columns) fmt::print("{:>14}", col);
  fmt::print("\n");
  for (const auto& row : t.rows) {
    for (double v : row) fmt::print("{:>14}", cell(v));
    fmt::print("\n");
  }
  for (const auto& [key, v] : t.summary) fmt::print("{} = {}\n", key, cell(v));
  for (const auto& note : t.notes) spdlog::info("{}", note);
  return 0;
}

int cmd_oracle(const RunConfig& c) {
  if (c.model.dim() > 3) throw ConfigError("oracle needs d <= 3 (got " + std::to_string(c.model.dim()) + ")");
  std::vector<double> gaps(c.oracle_instances);
  std::vector<double> sups(c.oracle_instances), grids(c.oracle_instances);
  parallel_for(c.oracle_instances, c.threads, [&](int i) {
    const std::uint64_t seed = trial_seed(c.master_seed, i);
    const Dataset data = sample_dataset(c.model, c.n, seed);
    const SupResult s = sup_gap(data, c.model, c.loss, c.constraints, c.optimizer, splitmix64(seed));
    const double g = grid_oracle_sup(data, c.model, c.loss, c.constraints, c.oracle_resolution);
    sups[i] = s.value;
    grids[i] = g;
    gaps[i] = std::abs(s.value - g) / std::max(g, 1e-3);
  });
  fmt::print("{:<9} {:>14} {:>14} {:>12}\n", "instance", "sup_gap", "grid_oracle", "rel_gap");
  double worst = 0.0;
  for (int i = 0; i < c.oracle_instances; ++i) {
    fmt::print("{:<9} {:>14} {:>14} {:>12}\n", i, cell(sups[i]), cell(grids[i]), cell(gaps[i]));
    worst = std::max(worst, gaps[i]);
  }
  fmt::print("max relative gap = {}\n", cell(worst));
  return worst <= 1e-3 ? 0 : 1;
}

}  // namespace

int run(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Concentration residuals for uniform generalization errors, with Monte-Carlo verification"};
  app.require_subcommand(1);
  std::string config_path, out_dir, which;
  std::uint64_t seed = 0;
  int threads = 0;
  bool reproducible = false, negative_control = false;
  std::vector<std::string> sets;
  const auto common = [&](CLI::App* sc) {
    sc->add_option("--config", config_path, "JSON config file");
    sc->add_option("--out", out_dir, "output directory");
    sc->add_option("--seed", seed, "master seed");
    sc->add_option("--threads", threads, "worker cap (0 = all cores)");
    sc->add_flag("--reproducible", reproducible, "omit wall-clock fields");
    sc->add_option("--set", sets, "override a dotted config path: key=value");
  };
  CLI::App* bounds = app.add_subcommand("bounds", "residual table for one configuration");
  CLI::App* verify = app.add_subcommand("verify", "Monte-Carlo tail verification");
  CLI::App* fi = app.add_subcommand("fi-check", "Poincare / log-Sobolev check on tanh test functions");
  CLI::App* sweep = app.add_subcommand("sweep", "effective-rank or proportional sweep");
  CLI::App* oracle = app.add_subcommand("oracle", "sup_gap against the exhaustive grid (d <= 3)");
  for (CLI::App* sc : {bounds, verify, fi, sweep, oracle}) common(sc);
  verify->add_flag("--negative-control", negative_control, "add the deliberately violated residual");
  sweep->add_option("which", which, "effective-rank | proportional")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    Json config = default_config_json();
    if (!config_path.empty()) {
      Json user;
      try {
        user = Json::parse(read_text(config_path));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + config_path + "': " + e.what());
      }
      if (user.contains("model")) config["model"] = Json::object();
      config.update(user, true);
    }
    for (const auto& s : sets) apply_set(config, s);
    if (!out_dir.empty()) config["output_dir"] = out_dir;
    if (seed != 0) config["master_seed"] = seed;
    if (threads != 0) config["threads"] = threads;
    if (reproducible) config["reproducible"] = true;
    RunConfig c = parse_run_config(config);
    prepare_output(c.output_dir);

    if (*bounds) return cmd_bounds(c);
    if (*verify) return cmd_verify(c, negative_control);
    if (*fi) return cmd_fi_check(c);
    if (*sweep) return cmd_sweep(c, which);
    if (*oracle) return cmd_oracle(c);
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("configuration error: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 2;
}

}  // namespace isoperi::cli
