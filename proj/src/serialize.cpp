// Copyright 2026 The riskprune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "riskprune/serialize.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "riskprune/error.hpp"
#include "riskprune/snapshot.hpp"

namespace riskprune {
namespace {

using json = nlohmann::ordered_json;

constexpr const char* kCalibrationSchema = "riskprune.calibration.v1";
constexpr const char* kTrialSchema = "riskprune.trial.v1";
constexpr const char* kTrialsSummarySchema = "riskprune.trials-summary.v1";
constexpr const char* kBaselineSummarySchema = "riskprune.baseline-summary.v1";
constexpr const char* kBaselineTrialSchema = "riskprune.baseline-trial.v1";
constexpr const char* kDatasetStatsSchema = "riskprune.dataset-stats.v1";

json number_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

json preprocess_json(const Preprocess& p) {
  json j;
  j["platt"] = p.platt;
  j["platt_a"] = p.platt_a;
  j["platt_b"] = p.platt_b;
  j["retriever_min"] = p.retriever_min;
  j["retriever_max"] = p.retriever_max;
  j["reranker_min"] = p.reranker_min;
  j["reranker_max"] = p.reranker_max;
  j["beta"] = p.beta;
  j["beta_mrr"] = number_or_null(p.beta_mrr);
  return j;
}

json calibration_json(const CalibrationResult& r) {
  json j;
  j["schema"] = kCalibrationSchema;
  j["threshold"] = r.threshold.tau;
  j["alpha_requested"] = r.alpha_requested;
  j["alpha_effective"] = r.alpha_effective;
  j["delta_requested"] = r.delta_requested;
  j["delta_effective"] = r.delta_effective;
  j["correction"] = to_string(r.correction);
  j["achievable"] = r.achievable;
  j["empirical_risk_at_threshold"] = r.empirical_risk_at_threshold;
  j["ucb_at_threshold"] = r.ucb_at_threshold;
  j["mean_size_at_threshold"] = r.mean_size_at_threshold;
  j["m"] = r.m;
  j["queries_no_gold"] = r.queries_no_gold;
  j["monotone_violation_fraction"] = r.monotone_violation_fraction;
  j["metric"] = r.metric;
  j["grid_step"] = r.grid_step;
  j["grid_points"] = r.grid_points;
  j["wsr_variant"] = r.wsr_variant;
  if (r.wsr_shuffle_seed) j["wsr_shuffle_seed"] = *r.wsr_shuffle_seed;
  if (r.ucb_dataset_order) j["ucb_dataset_order"] = *r.ucb_dataset_order;
  if (r.delta_corrected) j["delta_corrected"] = *r.delta_corrected;
  if (r.threshold_at_delta_corrected)
    j["threshold_at_delta_corrected"] = *r.threshold_at_delta_corrected;
  if (r.preprocess) j["preprocess"] = preprocess_json(*r.preprocess);
  return j;
}

const json& require(const json& j, const char* key, const char* what) {
  auto it = j.find(key);
  if (it == j.end())
    throw_parse(std::string(what) + ": missing key '" + key + "'");
  return *it;
}

double require_number(const json& j, const char* key, const char* what) {
  const json& v = require(j, key, what);
  if (!v.is_number())
    throw_parse(std::string(what) + ": key '" + key + "' is not a number");
  return v.get<double>();
}

Preprocess preprocess_from(const json& j) {
  constexpr const char* what = "calibration json preprocess";
  if (!j.is_object()) throw_parse("calibration json: preprocess is not an object");
  Preprocess p;
  p.platt = require(j, "platt", what).get<bool>();
  p.platt_a = require_number(j, "platt_a", what);
  p.platt_b = require_number(j, "platt_b", what);
  p.retriever_min = require_number(j, "retriever_min", what);
  p.retriever_max = require_number(j, "retriever_max", what);
  p.reranker_min = require_number(j, "reranker_min", what);
  p.reranker_max = require_number(j, "reranker_max", what);
  p.beta = require_number(j, "beta", what);
  const json& bm = require(j, "beta_mrr", what);
  p.beta_mrr = bm.is_null() ? std::numeric_limits<double>::quiet_NaN()
                            : bm.get<double>();
  return p;
}

}  // namespace

std::string calibration_to_json(const CalibrationResult& result) {
  return calibration_json(result).dump(2) + "\n";
}

CalibrationResult calibration_from_json(const std::string& text) {
  constexpr const char* what = "calibration json";
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw_parse(std::string(what) + ": " + e.what());
  }
  try {
    if (!j.is_object()) throw_parse(std::string(what) + ": not an object");
    const std::string schema = require(j, "schema", what).get<std::string>();
    if (schema != kCalibrationSchema)
      throw_parse(std::string(what) + ": unknown schema '" + schema + "'");
    CalibrationResult r;
    r.threshold.tau = require_number(j, "threshold", what);
    r.alpha_requested = require_number(j, "alpha_requested", what);
    r.alpha_effective = require_number(j, "alpha_effective", what);
    r.delta_requested = require_number(j, "delta_requested", what);
    r.delta_effective = require_number(j, "delta_effective", what);
    r.correction = correction_mode_from_string(
        require(j, "correction", what).get<std::string>());
    r.achievable = require(j, "achievable", what).get<bool>();
    r.empirical_risk_at_threshold =
        require_number(j, "empirical_risk_at_threshold", what);
    r.ucb_at_threshold = require_number(j, "ucb_at_threshold", what);
    r.mean_size_at_threshold = require_number(j, "mean_size_at_threshold", what);
    r.m = require(j, "m", what).get<size_t>();
    r.queries_no_gold = require(j, "queries_no_gold", what).get<int64_t>();
    r.monotone_violation_fraction =
        require_number(j, "monotone_violation_fraction", what);
    r.metric = require(j, "metric", what).get<std::string>();
    r.grid_step = require_number(j, "grid_step", what);
    r.grid_points = require(j, "grid_points", what).get<size_t>();
    r.wsr_variant = require(j, "wsr_variant", what).get<std::string>();
    if (j.contains("wsr_shuffle_seed"))
      r.wsr_shuffle_seed = j["wsr_shuffle_seed"].get<uint64_t>();
    if (j.contains("ucb_dataset_order"))
      r.ucb_dataset_order = j["ucb_dataset_order"].get<double>();
    if (j.contains("delta_corrected"))
      r.delta_corrected = j["delta_corrected"].get<double>();
    if (j.contains("threshold_at_delta_corrected"))
      r.threshold_at_delta_corrected =
          j["threshold_at_delta_corrected"].get<double>();
    if (j.contains("preprocess")) r.preprocess = preprocess_from(j["preprocess"]);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw_parse(std::string(what) + ": " + e.what());
  }
}

CalibrationResult calibration_from_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open calibration file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw_io("cannot read calibration file: " + path);
  return calibration_from_json(buf.str());
}

std::string trial_to_json_line(const TrialReport& report) {
  json j;
  j["schema"] = kTrialSchema;
  j["trial"] = report.trial;
  j["seed"] = report.seed;
  j["mrr_at_10"] = report.mrr_at_10;
  j["test_risk"] = report.test_risk;
  j["mean_pruned_size"] = report.mean_pruned_size;
  j["constraint_satisfied"] = report.constraint_satisfied;
  j["calibration"] = calibration_json(report.calibration);
  return j.dump();
}

std::string trials_summary_to_json(const TrialsSummary& summary) {
  json j;
  j["schema"] = kTrialsSummarySchema;
  j["n_trials"] = summary.n_trials;
  j["coverage"] = summary.coverage;
  j["mean_mrr_at_10"] = summary.mean_mrr;
  j["mean_size"] = summary.mean_size;
  j["mean_test_risk"] = summary.mean_test_risk;
  j["mean_confidence"] = summary.mean_confidence;
  j["speedup"] = std::isfinite(summary.speedup) ? json(summary.speedup)
                                                : json(nullptr);
  return j.dump(2) + "\n";
}

std::string baseline_summary_to_json(const BaselineSummary& summary) {
  json j;
  j["schema"] = kBaselineSummarySchema;
  j["kind"] = baseline_kind_name(summary.kind);
  j["required_mrr"] = summary.required_mrr;
  j["n_trials"] = summary.n_trials;
  j["coverage"] = summary.coverage;
  j["mean_mrr_at_10"] = summary.mean_mrr;
  j["mean_size"] = summary.mean_size;
  return j.dump(2) + "\n";
}

std::string baseline_trial_to_json_line(const BaselineSummary& summary,
                                        const BaselineTrial& trial) {
  json j;
  j["schema"] = kBaselineTrialSchema;
  j["kind"] = baseline_kind_name(summary.kind);
  j["trial"] = trial.trial;
  j["seed"] = trial.seed;
  j["tuned"] = trial.tuned;
  j["achievable"] = trial.achievable;
  j["mrr_at_10"] = trial.mrr_at_10;
  j["test_risk"] = trial.test_risk;
  j["mean_pruned_size"] = trial.mean_pruned_size;
  j["constraint_satisfied"] = trial.constraint_satisfied;
  return j.dump();
}

std::string dataset_stats_json(const Dataset& dataset) {
  int64_t candidates = 0;
  for (const QueryRecord& rec : dataset.records)
    candidates += static_cast<int64_t>(rec.candidates.size());
  json j;
  j["schema"] = kDatasetStatsSchema;
  j["queries"] = dataset.records.size();
  j["candidates"] = candidates;
  j["pool_size"] = dataset.meta.pool_size;
  j["calibrated"] = dataset.meta.calibrated;
  j["fused"] = dataset.meta.fused;
  j["beta"] = number_or_null(dataset.meta.beta);
  j["missing_reranker"] = dataset.meta.missing_reranker;
  j["queries_no_gold"] = dataset.meta.queries_no_gold;
  j["source"] = dataset.meta.source;
  return j.dump(2) + "\n";
}

std::string preprocess_to_json(const Preprocess& prep) {
  return preprocess_json(prep).dump(2) + "\n";
}

Preprocess preprocess_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw_parse(std::string("preprocess json: ") + e.what());
  }
  try {
    return preprocess_from(j);
  } catch (const nlohmann::json::exception& e) {
    throw_parse(std::string("preprocess json: ") + e.what());
  }
}

std::string tradeoff_to_csv(const std::vector<TradeoffRow>& rows) {
  std::string out = "alpha,mean_mrr_at_10,mean_size,coverage\n";
  for (const TradeoffRow& r : rows) {
    out += format_double(r.alpha);
    out += ',';
    out += format_double(r.mean_mrr);
    out += ',';
    out += format_double(r.mean_size);
    out += ',';
    out += format_double(r.coverage);
    out += '\n';
  }
  return out;
}

std::string confidence_sweep_to_csv(const std::vector<ConfidenceSweepRow>& rows) {
  std::string out = "alpha,corrected_confidence,coverage\n";
  for (const ConfidenceSweepRow& r : rows) {
    out += format_double(r.alpha);
    out += ',';
    out += format_double(r.corrected_confidence);
    out += ',';
    out += format_double(r.coverage);
    out += '\n';
  }
  return out;
}

const char* baseline_kind_name(BaselineKind kind) {
  return kind == BaselineKind::est ? "est" : "ert";
}

BaselineKind baseline_kind_from_string(std::string_view s) {
  if (s == "est") return BaselineKind::est;
  if (s == "ert") return BaselineKind::ert;
  throw_invalid("unknown baseline kind: " + std::string(s));
}

}  // namespace riskprune
