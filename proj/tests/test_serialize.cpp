#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "isoperi/errors.hpp"
#include "isoperi/harness.hpp"
#include "isoperi/serialize.hpp"
#include "isoperi/version.hpp"

using namespace isoperi;

namespace {

TrialBatch tiny_batch() {
  TrialConfig c{ModelSpec(SphericalCov{0.5}, Vector::Unit(2, 0), 0.25, LinkKind::logistic()), {1.0, 0.5},
                LossSpec::hinge(), 30, {}};
  c.optimizer.restarts = 4;
  return run_trials(c, 5, 17, {1, true});
}

}  // namespace

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(NAN) == "nan");
  CHECK(format_double(INFINITY) == "inf");
  CHECK(format_double(-INFINITY) == "-inf");
}

TEST_CASE("model json round trip for each covariance kind") {
  Vector mu(2);
  mu << 0.1, -0.2;
  Matrix full(2, 2);
  full << 2.0, 0.3, 0.3, 1.0;
  Vector diag(2);
  diag << 1.0, 4.0;
  const std::vector<ModelSpec> models{
      ModelSpec(SphericalCov{0.2}, Vector::Unit(2, 1), 0.5, LinkKind::probit()),
      ModelSpec(DiagonalCov{diag}, Vector::Ones(2), -0.1, mu, LinkKind::logistic()),
      ModelSpec(FullCov{full}, Vector::Ones(2), 0.0, LinkKind::logistic())};
  for (const ModelSpec& m : models) {
    const Json j = to_json(m);
    CHECK(to_json(model_from_json(j)).dump() == j.dump());
  }
  Json bad = to_json(models[0]);
  bad["covariance"]["s"] = -1.0;
  CHECK_THROWS_AS(model_from_json(bad), ConfigError);
}

TEST_CASE("loss and optimizer json") {
  CHECK(loss_from_json(to_json(LossSpec::hinge())).tag == LossTag::hinge);
  CHECK(loss_from_json(Json("logistic_loss")).tag == LossTag::logistic_loss);
  const LossSpec custom = LossSpec::custom([](double t) { return std::abs(t); }, [](double t) { return t > 0 ? 1.0 : -1.0; }, 1.0);
  CHECK_THROWS_AS(loss_from_json(to_json(custom)), ConfigError);
  OptimizerConfig cfg;
  cfg.restarts = 7;
  cfg.tol = 1e-9;
  const OptimizerConfig back = optimizer_from_json(to_json(cfg));
  CHECK(back.restarts == 7);
  CHECK(back.tol == 1e-9);
}

TEST_CASE("batch jsonl write-read-write is byte identical") {
  const TrialBatch b = tiny_batch();
  const std::string text = batch_to_jsonl(b);
  const Json header = Json::parse(text.substr(0, text.find('\n')));
  CHECK(header.at("schema_version") == kSchemaVersion);
  CHECK(header.at("kind") == "trial_batch");
  const TrialBatch back = batch_from_jsonl(text);
  CHECK(batch_to_jsonl(back) == text);
  CHECK(back.trials.size() == 5);
  CHECK(back.mean_sup == b.mean_sup);
  for (std::size_t i = 0; i < 5; ++i) CHECK(back.trials[i].sup_value == b.trials[i].sup_value);

  const auto path = (std::filesystem::temp_directory_path() / "isoperi_roundtrip.jsonl").string();
  write_batch_jsonl(b, path);
  CHECK(read_text(path) == text);
  CHECK(batch_to_jsonl(load_batch_jsonl(path)) == text);
  std::filesystem::remove(path);
}

TEST_CASE("corrupted batch names the line") {
  std::string text = batch_to_jsonl(tiny_batch());
  // break the third line (second trial record)
  std::size_t pos = 0;
  for (int i = 0; i < 2; ++i) pos = text.find('\n', pos) + 1;
  text.insert(pos, "{oops");
  try {
    batch_from_jsonl(text);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(batch_from_jsonl(""), ConfigError);
}

TEST_CASE("csv emitters") {
  TailCheckResult r;
  TailRow row;
  row.delta = 0.1;
  row.residual_name = "no_bias/logsobolev";
  row.residual = 0.25;
  row.exceed = 3;
  row.trials = 200;
  row.rate = 0.015;
  row.p_value = 1.0;
  row.verdict = "PASS";
  r.rows.push_back(row);
  const std::string csv = tail_to_csv(r);
  CHECK(csv.rfind("delta,residual_name,residual,exceed,M,rate,pvalue,verdict\n", 0) == 0);
  CHECK(csv.find("0.1,no_bias/logsobolev,0.25,3,200,0.015,1,PASS") != std::string::npos);
}
