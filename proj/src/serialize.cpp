// SPDX-License-Identifier: Apache-2.0
#include "isoperi/serialize.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "isoperi/errors.hpp"
#include "isoperi/version.hpp"

namespace isoperi {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

// JSON has no infinities; they travel as strings.
Json num(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

double to_double(const Json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  throw ConfigError(what + ": expected a number");
}

Json vec(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

Vector vec_from(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = to_double(j[i], what);
  return v;
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

Json residual_json(const ResidualResult& r) {
  Json j;
  j["applicable"] = r.applicable();
  if (r.applicable()) {
    j["residual"] = num(r.residual->value);
    j["log_residual"] = num(r.residual->log_value);
  } else {
    j["reason"] = r.reason;
  }
  if (r.c) j["c"] = num(*r.c);
  return j;
}

}  // namespace

Json to_json(const ModelSpec& model) {
  Json j;
  j["dim"] = model.dim();
  Json cov;
  const CovarianceSpec& spec = model.covariance().spec();
  if (auto* s = std::get_if<SphericalCov>(&spec)) {
    cov["kind"] = "spherical";
    cov["s"] = num(s->s);
  } else if (auto* d = std::get_if<DiagonalCov>(&spec)) {
    cov["kind"] = "diagonal";
    cov["diag"] = vec(d->diag);
  } else {
    const Matrix& m = std::get<FullCov>(spec).mat;
    cov["kind"] = "full";
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec(m.row(r).transpose()));
    cov["matrix"] = rows;
  }
  j["covariance"] = cov;
  j["theta1"] = vec(model.theta1());
  j["theta0"] = num(model.theta0());
  j["mu"] = vec(model.mu());
  j["link"] = to_string(model.link().tag);
  return j;
}

ModelSpec model_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("model: expected an object");
  const Json& cov = j.contains("covariance") ? j.at("covariance") : Json{{"kind", "spherical"}, {"s", 1.0}};
  const std::string kind = get_or<std::string>(cov, "kind", "spherical");
  int dim = get_or<int>(j, "dim", 0);
  if (j.contains("theta1") && dim == 0) dim = static_cast<int>(j.at("theta1").size());
  CovarianceSpec spec;
  if (kind == "spherical") {
    spec = SphericalCov{to_double(cov.contains("s") ? cov.at("s") : Json(1.0), "covariance.s")};
  } else if (kind == "diagonal") {
    Vector d = vec_from(cov.at("diag"), "covariance.diag");
    if (dim == 0) dim = static_cast<int>(d.size());
    spec = DiagonalCov{d};
  } else if (kind == "full") {
    const Json& rows = cov.at("matrix");
    if (!rows.is_array() || rows.empty()) throw ConfigError("covariance.matrix: expected a nonempty array of rows");
    Matrix m(rows.size(), rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Vector row = vec_from(rows[r], "covariance.matrix");
      if (row.size() != static_cast<Eigen::Index>(rows.size())) throw ConfigError("covariance.matrix must be square");
      m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    if (dim == 0) dim = static_cast<int>(m.rows());
    spec = FullCov{m};
  } else {
    throw ConfigError("unknown covariance kind '" + kind + "'");
  }
  if (dim <= 0) throw ConfigError("model.dim must be positive");
  const Vector theta1 = j.contains("theta1") ? vec_from(j.at("theta1"), "theta1") : Vector::Zero(dim);
  const Vector mu = j.contains("mu") && !j.at("mu").is_null() ? vec_from(j.at("mu"), "mu") : Vector::Zero(dim);
  const double theta0 = j.contains("theta0") ? to_double(j.at("theta0"), "theta0") : 0.0;
  const LinkKind link{parse_link(get_or<std::string>(j, "link", "logistic"))};
  return ModelSpec(spec, theta1, theta0, mu, link);
}

Json to_json(const ConstraintSet& c) { return Json{{"r_w", num(c.r_w)}, {"r_b", num(c.r_b)}}; }

ConstraintSet constraints_from_json(const Json& j) {
  ConstraintSet c;
  if (j.contains("r_w")) c.r_w = to_double(j.at("r_w"), "constraints.r_w");
  if (j.contains("r_b")) c.r_b = to_double(j.at("r_b"), "constraints.r_b");
  c.validate();
  return c;
}

Json to_json(const LossSpec& loss) { return Json{{"tag", to_string(loss.tag)}, {"lipschitz", num(loss.lipschitz)}}; }

LossSpec loss_from_json(const Json& j) {
  const std::string tag = j.is_string() ? j.get<std::string>() : get_or<std::string>(j, "tag", "logistic_loss");
  switch (parse_loss(tag)) {
    case LossTag::logistic_loss: return LossSpec::logistic();
    case LossTag::hinge: return LossSpec::hinge();
    case LossTag::custom: break;
  }
  throw ConfigError("custom losses cannot be loaded from JSON; construct them in code");
}

Json to_json(const OptimizerConfig& c) {
  Json j{{"restarts", c.restarts},     {"max_iters", c.max_iters}, {"step_init", num(c.step_init)},
         {"step_decay", num(c.step_decay)}, {"tol", num(c.tol)}, {"quad_order_2d", c.quad_order_2d},
         {"polish", c.polish},         {"audit_points", c.audit_points}, {"screen_points", c.screen_points},
         {"negate", c.negate}};
  return j;
}

OptimizerConfig optimizer_from_json(const Json& j, OptimizerConfig c) {
  if (j.is_null()) return c;
  c.restarts = get_or(j, "restarts", c.restarts);
  c.max_iters = get_or(j, "max_iters", c.max_iters);
  c.step_init = get_or(j, "step_init", c.step_init);
  c.step_decay = get_or(j, "step_decay", c.step_decay);
  c.tol = get_or(j, "tol", c.tol);
  c.quad_order_2d = get_or(j, "quad_order_2d", c.quad_order_2d);
  c.polish = get_or(j, "polish", c.polish);
  c.audit_points = get_or(j, "audit_points", c.audit_points);
  c.screen_points = get_or(j, "screen_points", c.screen_points);
  c.negate = get_or(j, "negate", c.negate);
  c.trace_path = get_or<std::string>(j, "trace_path", c.trace_path);
  c.validate();
  return c;
}

Json to_json(const KConstants& k) {
  Json j{{"k_p", num(k.k_p)},       {"k_ls", num(k.k_ls)},       {"k_chi2", num(k.k_chi2)},
         {"k_v", num(k.k_v)},       {"k_u", num(k.k_u)},         {"p_plus", num(k.p_plus)},
         {"p_minus", num(k.p_minus)}, {"strategy_p", to_string(k.strategy_p)},
         {"strategy_ls", to_string(k.strategy_ls)}};
  j["c_kls_user"] = k.c_kls_user ? num(*k.c_kls_user) : Json(nullptr);
  j["notes"] = k.notes;
  return j;
}

Json to_json(const BoundReport& r) {
  Json j;
  const BoundInput& in = r.input;
  j["input"] = Json{{"model", to_json(in.model)},
                    {"constraints", to_json(in.constraints)},
                    {"loss_lipschitz", num(in.loss_lipschitz)},
                    {"n", in.n},
                    {"delta", num(in.delta)},
                    {"k_constants", to_json(in.kconst)}};
  const ScalarFunctionals& f = r.functionals;
  const auto opt_num = [](const std::optional<double>& v) { return v ? num(*v) : Json(nullptr); };
  j["functionals"] = Json{{"theta0_eff", num(f.theta0_eff)},
                          {"signal_variance", num(f.signal_variance)},
                          {"log_mgf_theta1", num(f.log_mgf_theta1)},
                          {"log_mgf_num_g", opt_num(f.log_mgf_num_g)},
                          {"log_mgf_num_2g", opt_num(f.log_mgf_num_2g)},
                          {"log_mgf_den_g", opt_num(f.log_mgf_den_g)},
                          {"log_tilde_m_inverse", num(f.log_tilde_m_inverse)},
                          {"p_exceed", num(f.p_exceed)}};
  Json entries = Json::array();
  for (const BoundEntry& e : r.entries) {
    Json row{{"name", e.name}, {"mode", to_string(e.mode)}, {"informational", e.informational}};
    row.update(residual_json(e.result));
    entries.push_back(row);
  }
  j["entries"] = entries;
  j["rademacher_expectation_bound"] = num(r.rademacher_expectation_bound);
  if (r.best)
    j["best"] = Json{{"name", r.best->name},
                     {"mode", to_string(r.best->mode)},
                     {"residual", num(r.best->residual.value)},
                     {"log_residual", num(r.best->residual.log_value)}};
  else
    j["best"] = nullptr;
  j["best_reason"] = r.best_reason;
  j["warnings"] = r.warnings;
  return j;
}

Json to_json(const TailCheckResult& r) {
  Json rows = Json::array();
  for (const TailRow& t : r.rows)
    rows.push_back(Json{{"delta", num(t.delta)},
                        {"residual_name", t.residual_name},
                        {"residual", num(t.residual)},
                        {"exceed", t.exceed},
                        {"M", t.trials},
                        {"rate", num(t.rate)},
                        {"pvalue", num(t.p_value)},
                        {"verdict", t.verdict},
                        {"expected", t.expected}});
  return Json{{"centre", num(r.centre)}, {"guard", num(r.guard)}, {"level", num(r.level)},
              {"centering", r.centering}, {"rows", rows}};
}

Json to_json(const FICheckResult& r) {
  Json rows = Json::array();
  for (const FIRow& f : r.rows)
    rows.push_back(Json{{"fn_id", f.fn_id},
                        {"a", num(f.a)},
                        {"b", num(f.b)},
                        {"w_norm", num(f.w_norm)},
                        {"var", num(f.var)},
                        {"var_se", num(f.var_se)},
                        {"energy_p", num(f.energy_p)},
                        {"energy_p_se", num(f.energy_p_se)},
                        {"ent", num(f.ent)},
                        {"ent_se", num(f.ent_se)},
                        {"energy_ls", num(f.energy_ls)},
                        {"energy_ls_se", num(f.energy_ls_se)},
                        {"ratio_p", num(f.ratio_p)},
                        {"ratio_p_halfwidth", num(f.ratio_p_halfwidth)},
                        {"ratio_ls", num(f.ratio_ls)},
                        {"ratio_ls_halfwidth", num(f.ratio_ls_halfwidth)},
                        {"verdict", f.verdict}});
  return Json{{"k_constants", to_json(r.k)}, {"c", num(r.c)}, {"c_star", num(r.c_star)},
              {"passes", r.passes}, {"rows", rows}};
}

Json to_json(const SweepTable& t) {
  Json rows = Json::array();
  for (const auto& row : t.rows) {
    Json o;
    for (std::size_t i = 0; i < t.columns.size() && i < row.size(); ++i) o[t.columns[i]] = num(row[i]);
    rows.push_back(o);
  }
  Json summary = Json::object();
  for (const auto& [k, v] : t.summary) summary[k] = num(v);
  return Json{{"name", t.name}, {"rows", rows}, {"summary", summary}, {"notes", t.notes}};
}

std::string batch_to_jsonl(const TrialBatch& b) {
  std::ostringstream os;
  Json header{{"schema_version", kSchemaVersion},
              {"kind", "trial_batch"},
              {"code_version", b.code_version},
              {"created_at", b.created_at},
              {"master_seed", b.master_seed},
              {"trials", b.trials.size()},
              {"mean_sup", num(b.mean_sup)},
              {"se_sup", num(b.se_sup)},
              {"config", Json{{"model", to_json(b.config.model)},
                              {"constraints", to_json(b.config.constraints)},
                              {"loss", to_json(b.config.loss)},
                              {"n", b.config.n},
                              {"optimizer", to_json(b.config.optimizer)}}}};
  os << header.dump() << '\n';
  for (const TrialRecord& t : b.trials) {
    Json line{{"index", t.index},           {"trial_seed", t.trial_seed}, {"sup_value", num(t.sup_value)},
              {"norm_w", num(t.norm_w)},    {"abs_b", num(t.abs_b)},      {"runtime_ms", num(t.runtime_ms)},
              {"converged", t.converged}};
    if (!t.error.empty()) line["error"] = t.error;
    os << line.dump() << '\n';
  }
  return os.str();
}

void write_batch_jsonl(const TrialBatch& batch, const std::string& path) { write_text(path, batch_to_jsonl(batch)); }

TrialBatch batch_from_jsonl(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  const auto parse = [&](const std::string& s) {
    try {
      return Json::parse(s);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("batch file line " + std::to_string(line_no) + ": " + e.what());
    }
  };
  if (!std::getline(is, line)) throw ConfigError("batch file line 1: missing header");
  ++line_no;
  const Json header = parse(line);
  if (!header.is_object() || !header.contains("schema_version"))
    throw ConfigError("batch file line 1: header lacks schema_version");
  if (header.at("schema_version").get<int>() != kSchemaVersion)
    throw ConfigError("batch file line 1: unsupported schema_version");
  TrialBatch b{TrialConfig{model_from_json(header.at("config").at("model")), {}, LossSpec::logistic(), 0, {}}, 0, {}, 0.0, 0.0, {}, {}};
  try {
    const Json& cfg = header.at("config");
    b.config.constraints = constraints_from_json(cfg.at("constraints"));
    b.config.loss = loss_from_json(cfg.at("loss"));
    b.config.n = cfg.at("n").get<int>();
    b.config.optimizer = optimizer_from_json(cfg.at("optimizer"));
    b.master_seed = header.at("master_seed").get<std::uint64_t>();
    b.mean_sup = to_double(header.at("mean_sup"), "mean_sup");
    b.se_sup = to_double(header.at("se_sup"), "se_sup");
    b.created_at = header.at("created_at").get<std::string>();
    b.code_version = header.at("code_version").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("batch file line 1: ") + e.what());
  }
  const std::size_t expected = header.at("trials").get<std::size_t>();
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const Json j = parse(line);
    try {
      TrialRecord t;
      t.index = j.at("index").get<int>();
      t.trial_seed = j.at("trial_seed").get<std::uint64_t>();
      t.sup_value = to_double(j.at("sup_value"), "sup_value");
      t.norm_w = to_double(j.at("norm_w"), "norm_w");
      t.abs_b = to_double(j.at("abs_b"), "abs_b");
      t.runtime_ms = to_double(j.at("runtime_ms"), "runtime_ms");
      t.converged = j.at("converged").get<bool>();
      if (j.contains("error")) t.error = j.at("error").get<std::string>();
      b.trials.push_back(std::move(t));
    } catch (const std::exception& e) {
      throw ConfigError("batch file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (b.trials.size() != expected)
    throw ConfigError("batch file: header announces " + std::to_string(expected) + " trials, found " +
                      std::to_string(b.trials.size()));
  return b;
}

TrialBatch load_batch_jsonl(const std::string& path) { return batch_from_jsonl(read_text(path)); }

std::string tail_to_csv(const TailCheckResult& r) {
  std::ostringstream os;
  os << "delta,residual_name,residual,exceed,M,rate,pvalue,verdict\n";
  for (const TailRow& t : r.rows)
    os << format_double(t.delta) << ',' << t.residual_name << ',' << format_double(t.residual) << ',' << t.exceed
       << ',' << t.trials << ',' << format_double(t.rate) << ',' << format_double(t.p_value) << ',' << t.verdict
       << '\n';
  return os.str();
}

std::string fi_to_csv(const FICheckResult& r) {
  std::ostringstream os;
  os << "fn_id,var,energy_p,ratio_p,ratio_p_halfwidth,ent,energy_ls,ratio_ls,ratio_ls_halfwidth,verdict\n";
  for (const FIRow& f : r.rows)
    os << f.fn_id << ',' << format_double(f.var) << ',' << format_double(f.energy_p) << ','
       << format_double(f.ratio_p) << ',' << format_double(f.ratio_p_halfwidth) << ',' << format_double(f.ent) << ','
       << format_double(f.energy_ls) << ',' << format_double(f.ratio_ls) << ','
       << format_double(f.ratio_ls_halfwidth) << ',' << f.verdict << '\n';
  return os.str();
}

std::string sweep_to_csv(const SweepTable& t) {
  std::ostringstream os;
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_double(row[i]);
    os << '\n';
  }
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace isoperi
