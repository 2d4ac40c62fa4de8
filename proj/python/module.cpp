// SPDX-License-Identifier: Apache-2.0
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "isoperi/analytics.hpp"
#include "isoperi/bounds.hpp"
#include "isoperi/harness.hpp"
#include "isoperi/model.hpp"
#include "isoperi/risk.hpp"
#include "isoperi/rng.hpp"
#include "isoperi/serialize.hpp"
#include "isoperi/version.hpp"

namespace py = pybind11;
using namespace isoperi;

namespace {

// Structured results cross the boundary as JSON text; the Python package
// decodes them into dicts.
ModelSpec model_from_text(const std::string& text) { return model_from_json(Json::parse(text)); }

LossSpec loss_from_name(const std::string& name) { return loss_from_json(Json(name)); }

Dataset dataset_from(const Matrix& x, const Vector& y) {
  if (x.rows() != y.size()) throw ConfigError("x and y have different numbers of rows");
  Dataset d;
  d.x = x;
  d.y = y;
  return d;
}

KRequest k_request(const std::string& sp, const std::string& sls, std::optional<double> c_kls,
                   std::optional<double> k_p, std::optional<double> k_ls) {
  KRequest r;
  r.strategy_p = parse_strategy(sp);
  r.strategy_ls = parse_strategy(sls);
  r.c_kls_user = c_kls;
  r.k_p_override = k_p;
  r.k_ls_override = k_ls;
  return r;
}

}  // namespace

PYBIND11_MODULE(_isoperi, m) {
  m.doc() = "Concentration residuals for uniform generalization errors (C++ core)";
  m.attr("__version__") = kVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("philox4x32", &philox4x32, py::arg("counter"), py::arg("key"));

  m.def(
      "model_json",
      [](const std::string& text) { return to_json(model_from_text(text)).dump(); },
      "Validate a model given as JSON and return its canonical JSON.");

  m.def(
      "sample_dataset",
      [](const std::string& model, int n, std::uint64_t seed) {
        const Dataset d = sample_dataset(model_from_text(model), n, seed);
        return py::make_tuple(d.x, d.y);
      },
      py::arg("model"), py::arg("n"), py::arg("seed"));

  m.def("mgf", [](const std::string& model, const Vector& t) { return mgf(model_from_text(model), t); });
  m.def("tilde_m_inverse", [](const std::string& model) { return tilde_m_inverse(model_from_text(model)); });
  m.def("chi2_conditional", [](const std::string& model, int y) { return chi2_conditional(model_from_text(model), y); });
  m.def("label_prob", [](const std::string& model) { return label_prob(model_from_text(model)); });
  m.def("p_exceed", [](const std::string& model) { return p_exceed(model_from_text(model)); });

  m.def(
      "k_constants",
      [](const std::string& model, const std::string& sp, const std::string& sls, std::optional<double> c_kls,
         std::optional<double> k_p, std::optional<double> k_ls) {
        return to_json(k_constants(model_from_text(model), k_request(sp, sls, c_kls, k_p, k_ls))).dump();
      },
      py::arg("model"), py::arg("strategy_p") = "bakry_emery", py::arg("strategy_ls") = "bakry_emery",
      py::arg("c_kls_user") = py::none(), py::arg("k_p") = py::none(), py::arg("k_ls") = py::none());

  m.def(
      "best_residual",
      [](const std::string& model, double r_w, double r_b, int n, double delta, const std::string& loss,
         const std::string& sp, const std::string& sls, std::optional<double> c_kls) {
        const ModelSpec ms = model_from_text(model);
        const LossSpec ls = loss_from_name(loss);
        const KConstants k = k_constants(ms, k_request(sp, sls, c_kls, std::nullopt, std::nullopt));
        BoundInput in{ms, {r_w, r_b}, ls.lipschitz, n, delta, k, Mode::logsobolev, ls};
        return to_json(best_residual(in)).dump();
      },
      py::arg("model"), py::arg("r_w"), py::arg("r_b"), py::arg("n"), py::arg("delta"),
      py::arg("loss") = "logistic_loss", py::arg("strategy_p") = "bakry_emery",
      py::arg("strategy_ls") = "bakry_emery", py::arg("c_kls_user") = py::none());

  m.def("rademacher_bound", &rademacher_bound, py::arg("L"), py::arg("r_w"), py::arg("r_b"),
        py::arg("trace_second_moment"), py::arg("n"));

  m.def(
      "population_risk",
      [](const std::string& model, const std::string& loss, const Vector& w, double b) {
        return population_risk(model_from_text(model), loss_from_name(loss), w, b);
      },
      py::arg("model"), py::arg("loss"), py::arg("w"), py::arg("b"));

  m.def(
      "empirical_risk",
      [](const Matrix& x, const Vector& y, const std::string& loss, const Vector& w, double b) {
        return empirical_risk(dataset_from(x, y), loss_from_name(loss), w, b);
      },
      py::arg("x"), py::arg("y"), py::arg("loss"), py::arg("w"), py::arg("b"));

  m.def(
      "sup_gap",
      [](const Matrix& x, const Vector& y, const std::string& model, const std::string& loss, double r_w, double r_b,
         std::uint64_t seed, int restarts) {
        OptimizerConfig cfg;
        cfg.restarts = restarts;
        const SupResult r =
            sup_gap(dataset_from(x, y), model_from_text(model), loss_from_name(loss), {r_w, r_b}, cfg, seed);
        py::dict d;
        d["value"] = r.value;
        d["argmax_w"] = r.argmax_w;
        d["argmax_b"] = r.argmax_b;
        d["starts_used"] = r.starts_used;
        d["converged"] = r.converged;
        return d;
      },
      py::arg("x"), py::arg("y"), py::arg("model"), py::arg("loss"), py::arg("r_w"), py::arg("r_b"),
      py::arg("seed") = 0, py::arg("restarts") = 24);

  m.def(
      "grid_oracle_sup",
      [](const Matrix& x, const Vector& y, const std::string& model, const std::string& loss, double r_w, double r_b,
         int resolution) {
        return grid_oracle_sup(dataset_from(x, y), model_from_text(model), loss_from_name(loss), {r_w, r_b},
                               resolution);
      },
      py::arg("x"), py::arg("y"), py::arg("model"), py::arg("loss"), py::arg("r_w"), py::arg("r_b"),
      py::arg("resolution") = 51);

  m.def(
      "gradient_check",
      [](const std::string& model, const std::string& loss, const Vector& w, double b) {
        return gradient_check(model_from_text(model), loss_from_name(loss), w, b);
      },
      py::arg("model"), py::arg("loss"), py::arg("w"), py::arg("b"));

  m.def(
      "run_trials",
      [](const std::string& model, const std::string& loss, double r_w, double r_b, int n, int trials,
         std::uint64_t seed, int threads) {
        TrialConfig tc{model_from_text(model), {r_w, r_b}, loss_from_name(loss), n, {}};
        py::gil_scoped_release release;
        return batch_to_jsonl(run_trials(tc, trials, seed, {threads, true}));
      },
      py::arg("model"), py::arg("loss"), py::arg("r_w"), py::arg("r_b"), py::arg("n"), py::arg("trials"),
      py::arg("seed"), py::arg("threads") = 0);

  m.def(
      "tail_check",
      [](const std::string& batch_jsonl, const std::vector<double>& deltas, bool negative_control,
         bool allow_small_batch) {
        const TrialBatch batch = batch_from_jsonl(batch_jsonl);
        const KConstants k = k_constants(batch.config.model, KRequest{});
        BoundInput in{batch.config.model, batch.config.constraints, batch.config.loss.lipschitz, batch.config.n,
                      0.1, k, Mode::logsobolev, batch.config.loss};
        TailCheckOptions opt;
        opt.negative_control = negative_control;
        opt.allow_small_batch = allow_small_batch;
        return to_json(tail_check(batch, in, deltas, opt)).dump();
      },
      py::arg("batch_jsonl"), py::arg("deltas"), py::arg("negative_control") = false,
      py::arg("allow_small_batch") = false);

  m.def(
      "independence_check",
      [](const std::string& model, int n, int repetitions, std::uint64_t seed, bool allow_bias, int threads) {
        IndependenceOptions opt;
        opt.allow_bias = allow_bias;
        opt.threads = threads;
        const ModelSpec ms = model_from_text(model);
        py::gil_scoped_release release;
        const IndependenceResult r = independence_check(ms, n, repetitions, seed, opt);
        return std::make_tuple(r.repetitions, r.rejections, r.rate);
      },
      py::arg("model"), py::arg("n"), py::arg("repetitions"), py::arg("seed"), py::arg("allow_bias") = false,
      py::arg("threads") = 0);

  m.def(
      "fi_check",
      [](const std::string& model, int family_size, int n_mc, std::uint64_t seed, double c) {
        const ModelSpec ms = model_from_text(model);
        FIOptions opt;
        opt.family_size = family_size;
        opt.n_mc = n_mc;
        opt.c = c;
        opt.batches = std::min(50, n_mc);
        const KConstants k = k_constants(ms, KRequest{});
        py::gil_scoped_release release;
        return to_json(fi_check(ms, k, opt, seed)).dump();
      },
      py::arg("model"), py::arg("family_size") = 50, py::arg("n_mc") = 100000, py::arg("seed") = 1,
      py::arg("c") = 2.0);
}
