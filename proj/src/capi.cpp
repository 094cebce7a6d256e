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

#include "riskprune.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "json.hpp"
#include "riskprune/calibrate.hpp"
#include "riskprune/error.hpp"
#include "riskprune/evaluate.hpp"
#include "riskprune/ingest.hpp"
#include "riskprune/serialize.hpp"
#include "riskprune/snapshot.hpp"
#include "riskprune/synthetic.hpp"

struct rp_dataset {
  riskprune::Dataset data;
};

namespace {

namespace rp = riskprune;
using json = nlohmann::ordered_json;

constexpr const char* kVersion = "1.0.0";

thread_local std::string t_error;

// Heap string with free-on-unwind, so multi-output functions never leak or
// publish partial results when a later allocation fails.
struct CString {
  char* p = nullptr;

  CString() = default;
  explicit CString(const std::string& s) {
    p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p == nullptr) throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
  }
  CString(const CString&) = delete;
  CString& operator=(const CString&) = delete;
  CString(CString&& other) noexcept : p(std::exchange(other.p, nullptr)) {}
  CString& operator=(CString&& other) noexcept {
    if (this != &other) {
      std::free(p);
      p = std::exchange(other.p, nullptr);
    }
    return *this;
  }
  ~CString() { std::free(p); }

  char* release() { return std::exchange(p, nullptr); }
};

rp_status status_of(rp::ErrorCategory c) {
  switch (c) {
    case rp::ErrorCategory::io:
      return RP_ERR_IO;
    case rp::ErrorCategory::parse:
      return RP_ERR_PARSE;
    case rp::ErrorCategory::domain:
      return RP_ERR_DOMAIN;
    case rp::ErrorCategory::invalid_argument:
      return RP_ERR_INVALID_ARGUMENT;
  }
  return RP_ERR_INTERNAL;
}

template <typename Fn>
rp_status guarded(Fn&& fn) {
  try {
    fn();
    return RP_OK;
  } catch (const rp::Error& e) {
    t_error = e.what();
    return status_of(e.category());
  } catch (const std::bad_alloc&) {
    t_error = "out of memory";
    return RP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    t_error = e.what();
    return RP_ERR_INTERNAL;
  } catch (...) {
    t_error = "unknown failure";
    return RP_ERR_INTERNAL;
  }
}

void require_arg(const void* p, const char* name) {
  if (p == nullptr) rp::throw_invalid(std::string(name) + " must not be NULL");
}

json parse_config(const char* text, const char* what) {
  if (text == nullptr || *text == '\0') return json::object();
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    rp::throw_parse(std::string(what) + ": " + e.what());
  }
  if (!j.is_object()) rp::throw_parse(std::string(what) + ": not a JSON object");
  return j;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const char* what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known)
      rp::throw_parse(std::string(what) + ": unknown key '" + it.key() + "'");
  }
}

double get_double(const json& j, const char* key, double dflt,
                  const char* what) {
  auto it = j.find(key);
  if (it == j.end()) return dflt;
  if (!it->is_number())
    rp::throw_parse(std::string(what) + ": key '" + key + "' is not a number");
  return it->get<double>();
}

int64_t get_int(const json& j, const char* key, int64_t dflt,
                const char* what) {
  auto it = j.find(key);
  if (it == j.end()) return dflt;
  if (!it->is_number_integer())
    rp::throw_parse(std::string(what) + ": key '" + key +
                    "' is not an integer");
  return it->get<int64_t>();
}

uint64_t get_uint(const json& j, const char* key, uint64_t dflt,
                  const char* what) {
  auto it = j.find(key);
  if (it == j.end()) return dflt;
  if (!it->is_number_integer() ||
      (it->is_number_integer() && !it->is_number_unsigned() &&
       it->get<int64_t>() < 0))
    rp::throw_parse(std::string(what) + ": key '" + key +
                    "' is not a non-negative integer");
  return it->get<uint64_t>();
}

bool get_bool(const json& j, const char* key, bool dflt, const char* what) {
  auto it = j.find(key);
  if (it == j.end()) return dflt;
  if (!it->is_boolean())
    rp::throw_parse(std::string(what) + ": key '" + key + "' is not a boolean");
  return it->get<bool>();
}

std::string get_string(const json& j, const char* key, const char* dflt,
                       const char* what) {
  auto it = j.find(key);
  if (it == j.end()) return dflt;
  if (!it->is_string())
    rp::throw_parse(std::string(what) + ": key '" + key + "' is not a string");
  return it->get<std::string>();
}

rp::SynthConfig synth_config_from(const json& j) {
  constexpr const char* what = "synth config";
  check_keys(j,
             {"n_queries", "pool_size", "n_gold", "n_gold_max", "gap", "noise",
              "reranker", "reranker_noise", "embedding", "embedding_dim",
              "seed"},
             what);
  rp::SynthConfig c;
  c.n_queries = get_int(j, "n_queries", c.n_queries, what);
  c.pool_size = static_cast<int>(get_int(j, "pool_size", c.pool_size, what));
  c.n_gold = static_cast<int>(get_int(j, "n_gold", c.n_gold, what));
  c.n_gold_max = static_cast<int>(get_int(j, "n_gold_max", c.n_gold_max, what));
  c.gap = get_double(j, "gap", c.gap, what);
  c.noise = get_double(j, "noise", c.noise, what);
  c.reranker = rp::reranker_mode_from_string(
      get_string(j, "reranker", "consistent", what));
  c.reranker_noise = get_double(j, "reranker_noise", c.reranker_noise, what);
  c.embedding = get_bool(j, "embedding", c.embedding, what);
  c.embedding_dim =
      static_cast<int>(get_int(j, "embedding_dim", c.embedding_dim, what));
  c.seed = get_uint(j, "seed", c.seed, what);
  c.validate();
  return c;
}

rp::PrepOptions prep_options_from(const json& j, const char* what) {
  check_keys(j, {"fixed_beta", "beta_step", "mrr_k"}, what);
  rp::PrepOptions o;
  if (auto it = j.find("fixed_beta"); it != j.end() && !it->is_null()) {
    if (!it->is_number())
      rp::throw_parse(std::string(what) + ": key 'fixed_beta' is not a number");
    o.fixed_beta = it->get<double>();
  }
  o.beta_step = get_double(j, "beta_step", o.beta_step, what);
  o.mrr_k = static_cast<int>(get_int(j, "mrr_k", o.mrr_k, what));
  return o;
}

rp::CalibrateOptions calibrate_options_from(const json& j, const char* what) {
  check_keys(j,
             {"alpha", "delta", "mode", "metric", "grid_step", "wsr",
              "hoeffding", "shuffle_seed", "workers"},
             what);
  rp::CalibrateOptions o;
  o.alpha = get_double(j, "alpha", o.alpha, what);
  o.delta = get_double(j, "delta", o.delta, what);
  o.mode =
      rp::correction_mode_from_string(get_string(j, "mode", "both", what));
  o.metric = rp::metric_from_string(get_string(j, "metric", "mrr@10", what));
  o.grid_step = get_double(j, "grid_step", o.grid_step, what);
  o.wsr =
      rp::wsr_variant_from_string(get_string(j, "wsr", "predictable", what));
  o.hoeffding = get_bool(j, "hoeffding", o.hoeffding, what);
  if (auto it = j.find("shuffle_seed"); it != j.end() && !it->is_null())
    o.shuffle_seed = get_uint(j, "shuffle_seed", 0, what);
  o.workers = static_cast<int>(get_int(j, "workers", o.workers, what));
  return o;
}

rp::TrialConfig trial_config_from(const json& j, const char* what) {
  check_keys(j,
             {"n_trials", "calib_size", "test_size", "seed", "workers", "prep",
              "calibration"},
             what);
  rp::TrialConfig cfg;
  cfg.n_trials = static_cast<int>(get_int(j, "n_trials", cfg.n_trials, what));
  cfg.calib_size = static_cast<size_t>(get_int(j, "calib_size", 0, what));
  cfg.test_size = static_cast<size_t>(get_int(j, "test_size", 0, what));
  cfg.master_seed = get_uint(j, "seed", cfg.master_seed, what);
  cfg.workers = static_cast<int>(get_int(j, "workers", cfg.workers, what));
  if (auto it = j.find("prep"); it != j.end()) {
    if (!it->is_object())
      rp::throw_parse(std::string(what) + ": key 'prep' is not an object");
    cfg.prep = prep_options_from(*it, "prep options");
  }
  if (auto it = j.find("calibration"); it != j.end()) {
    if (!it->is_object())
      rp::throw_parse(std::string(what) +
                      ": key 'calibration' is not an object");
    cfg.calibration = calibrate_options_from(*it, "calibration options");
  }
  return cfg;
}

std::vector<double> alphas_from(json& j, const char* what) {
  auto it = j.find("alphas");
  if (it == j.end())
    rp::throw_parse(std::string(what) + ": missing key 'alphas'");
  if (!it->is_array())
    rp::throw_parse(std::string(what) + ": key 'alphas' is not an array");
  std::vector<double> out;
  out.reserve(it->size());
  for (const json& v : *it) {
    if (!v.is_number())
      rp::throw_parse(std::string(what) + ": 'alphas' holds a non-number");
    out.push_back(v.get<double>());
  }
  j.erase("alphas");
  return out;
}

std::string trials_jsonl(const rp::TrialsSummary& s) {
  std::string lines;
  for (const rp::TrialReport& t : s.trials) {
    lines += rp::trial_to_json_line(t);
    lines += '\n';
  }
  return lines;
}

std::string baseline_jsonl(const rp::BaselineSummary& s) {
  std::string lines;
  for (const rp::BaselineTrial& t : s.trials) {
    lines += rp::baseline_trial_to_json_line(s, t);
    lines += '\n';
  }
  return lines;
}

}  // namespace

extern "C" {

const char* rp_version(void) { return kVersion; }

const char* rp_last_error(void) { return t_error.c_str(); }

void rp_string_free(char* s) { std::free(s); }

void rp_dataset_free(rp_dataset* dataset) { delete dataset; }

rp_status rp_dataset_load(const char* path, rp_dataset** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    auto d = std::make_unique<rp_dataset>();
    d->data = rp::load_snapshot_file(path);
    *out = d.release();
  });
}

rp_status rp_dataset_save(const rp_dataset* dataset, const char* path) {
  return guarded([&] {
    require_arg(dataset, "dataset");
    require_arg(path, "path");
    rp::save_snapshot_file(dataset->data, path);
  });
}

rp_status rp_dataset_from_run_files(const char* retriever_path,
                                    const char* reranker_path,
                                    const char* qrels_path, int pool_size,
                                    rp_dataset** out) {
  return guarded([&] {
    require_arg(retriever_path, "retriever_path");
    require_arg(qrels_path, "qrels_path");
    require_arg(out, "out");
    std::vector<rp::RunEntry> retriever = rp::parse_run_file(retriever_path);
    std::vector<rp::RunEntry> reranker;
    if (reranker_path != nullptr)
      reranker = rp::parse_run_file(reranker_path);
    rp::Qrels qrels = rp::parse_qrels_file(qrels_path);
    auto d = std::make_unique<rp_dataset>();
    d->data = rp::build_dataset(retriever, reranker, qrels, pool_size);
    *out = d.release();
  });
}

rp_status rp_dataset_synth(const char* config_json, rp_dataset** out) {
  return guarded([&] {
    require_arg(out, "out");
    rp::SynthConfig cfg =
        synth_config_from(parse_config(config_json, "synth config"));
    auto d = std::make_unique<rp_dataset>();
    d->data = rp::generate(cfg);
    *out = d.release();
  });
}

rp_status rp_dataset_stats(const rp_dataset* dataset, char** out_json) {
  return guarded([&] {
    require_arg(dataset, "dataset");
    require_arg(out_json, "out_json");
    CString s(rp::dataset_stats_json(dataset->data));
    *out_json = s.release();
  });
}

rp_status rp_dataset_prepare(rp_dataset* dataset, const char* options_json,
                             char** out_preprocess_json) {
  return guarded([&] {
    require_arg(dataset, "dataset");
    rp::PrepOptions opts = prep_options_from(
        parse_config(options_json, "prepare options"), "prepare options");
    rp::Preprocess prep = rp::fit_apply_preprocess(dataset->data, opts);
    if (out_preprocess_json != nullptr) {
      CString s(rp::preprocess_to_json(prep));
      *out_preprocess_json = s.release();
    }
  });
}

rp_status rp_calibrate(const rp_dataset* calib, const char* options_json,
                       char** out_result_json, char** out_curve_csv) {
  return guarded([&] {
    require_arg(calib, "calib");
    require_arg(out_result_json, "out_result_json");
    json j = parse_config(options_json, "calibrate options");
    std::optional<rp::Preprocess> embed;
    if (auto it = j.find("preprocess"); it != j.end()) {
      embed = rp::preprocess_from_json(it->dump());
      j.erase("preprocess");
    }
    bool want_curve = get_bool(j, "curve", false, "calibrate options");
    j.erase("curve");
    rp::CalibrateOptions opts =
        calibrate_options_from(j, "calibrate options");
    rp::RiskCurve curve;
    rp::CalibrationResult result =
        rp::calibrate(calib->data, opts, want_curve ? &curve : nullptr);
    if (embed) result.preprocess = embed;
    CString result_str(rp::calibration_to_json(result));
    CString curve_str;
    if (want_curve && out_curve_csv != nullptr) {
      std::ostringstream ss;
      rp::write_curve_csv(curve, ss);
      curve_str = CString(ss.str());
    }
    *out_result_json = result_str.release();
    if (out_curve_csv != nullptr) *out_curve_csv = curve_str.release();
  });
}

rp_status rp_evaluate(const rp_dataset* test, const char* calibration_json,
                      char** out_report_json) {
  return guarded([&] {
    require_arg(test, "test");
    require_arg(calibration_json, "calibration_json");
    require_arg(out_report_json, "out_report_json");
    rp::CalibrationResult result =
        rp::calibration_from_json(calibration_json);
    rp::Dataset data = test->data;
    if (result.preprocess) rp::apply_preprocess(data, *result.preprocess);
    rp::TrialReport rep = rp::evaluate_test(data, result);
    CString s(rp::trial_to_json_line(rep) + "\n");
    *out_report_json = s.release();
  });
}

rp_status rp_trials(const rp_dataset* pool, const char* config_json,
                    char** out_summary_json, char** out_trials_jsonl) {
  return guarded([&] {
    require_arg(pool, "pool");
    require_arg(out_summary_json, "out_summary_json");
    rp::TrialConfig cfg = trial_config_from(
        parse_config(config_json, "trials config"), "trials config");
    rp::TrialsSummary summary = rp::run_trials(pool->data, cfg);
    CString summary_str(rp::trials_summary_to_json(summary));
    CString lines_str;
    if (out_trials_jsonl != nullptr) lines_str = CString(trials_jsonl(summary));
    *out_summary_json = summary_str.release();
    if (out_trials_jsonl != nullptr) *out_trials_jsonl = lines_str.release();
  });
}

rp_status rp_baseline_trials(const rp_dataset* pool, const char* config_json,
                             char** out_summary_json,
                             char** out_trials_jsonl) {
  return guarded([&] {
    require_arg(pool, "pool");
    require_arg(out_summary_json, "out_summary_json");
    json j = parse_config(config_json, "baseline config");
    auto kind_it = j.find("kind");
    if (kind_it == j.end() || !kind_it->is_string())
      rp::throw_parse("baseline config: missing string key 'kind'");
    rp::BaselineKind kind =
        rp::baseline_kind_from_string(kind_it->get<std::string>());
    j.erase("kind");
    auto req_it = j.find("required_mrr");
    if (req_it == j.end() || !req_it->is_number())
      rp::throw_parse("baseline config: missing numeric key 'required_mrr'");
    double required = req_it->get<double>();
    j.erase("required_mrr");
    rp::TrialConfig cfg = trial_config_from(j, "baseline config");
    rp::BaselineSummary summary =
        rp::run_baseline_trials(pool->data, cfg, kind, required);
    CString summary_str(rp::baseline_summary_to_json(summary));
    CString lines_str;
    if (out_trials_jsonl != nullptr)
      lines_str = CString(baseline_jsonl(summary));
    *out_summary_json = summary_str.release();
    if (out_trials_jsonl != nullptr) *out_trials_jsonl = lines_str.release();
  });
}

rp_status rp_tradeoff(const rp_dataset* pool, const char* config_json,
                      char** out_csv) {
  return guarded([&] {
    require_arg(pool, "pool");
    require_arg(out_csv, "out_csv");
    json j = parse_config(config_json, "tradeoff config");
    std::vector<double> alphas = alphas_from(j, "tradeoff config");
    rp::TrialConfig cfg = trial_config_from(j, "tradeoff config");
    std::vector<rp::TradeoffRow> rows =
        rp::tradeoff(pool->data, std::move(alphas), cfg);
    CString s(rp::tradeoff_to_csv(rows));
    *out_csv = s.release();
  });
}

rp_status rp_confidence_sweep(const rp_dataset* pool, const char* config_json,
                              char** out_csv) {
  return guarded([&] {
    require_arg(pool, "pool");
    require_arg(out_csv, "out_csv");
    json j = parse_config(config_json, "confidence sweep config");
    std::vector<double> alphas = alphas_from(j, "confidence sweep config");
    rp::TrialConfig cfg = trial_config_from(j, "confidence sweep config");
    std::vector<rp::ConfidenceSweepRow> rows =
        rp::confidence_sweep(pool->data, std::move(alphas), cfg);
    CString s(rp::confidence_sweep_to_csv(rows));
    *out_csv = s.release();
  });
}

}  // extern "C"
