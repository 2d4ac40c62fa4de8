// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>
#include <string>

#include "isoperi/bounds.hpp"
#include "isoperi/harness.hpp"
#include "isoperi/model.hpp"
#include "isoperi/risk.hpp"

namespace isoperi {

using Json = nlohmann::ordered_json;

/// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double v);

Json to_json(const ModelSpec& model);
ModelSpec model_from_json(const Json& j);

Json to_json(const ConstraintSet& c);
ConstraintSet constraints_from_json(const Json& j);

/// Only the built-in losses round-trip; custom losses serialize their tag and
/// Lipschitz constant and refuse to load.
Json to_json(const LossSpec& loss);
LossSpec loss_from_json(const Json& j);

Json to_json(const OptimizerConfig& cfg);
OptimizerConfig optimizer_from_json(const Json& j, OptimizerConfig base = {});

Json to_json(const KConstants& k);
Json to_json(const BoundReport& report);

Json to_json(const TailCheckResult& r);
Json to_json(const FICheckResult& r);
Json to_json(const SweepTable& t);

/// Header line (schema_version, config, summary) followed by one line per trial.
std::string batch_to_jsonl(const TrialBatch& batch);
void write_batch_jsonl(const TrialBatch& batch, const std::string& path);
/// Throws ConfigError naming the offending line on malformed input.
TrialBatch batch_from_jsonl(const std::string& text);
TrialBatch load_batch_jsonl(const std::string& path);

/// delta,residual_name,residual,exceed,M,rate,pvalue,verdict
std::string tail_to_csv(const TailCheckResult& r);
std::string fi_to_csv(const FICheckResult& r);
std::string sweep_to_csv(const SweepTable& t);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace isoperi
