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

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "riskprune/calibrate.hpp"
#include "riskprune/ingest.hpp"
#include "riskprune/types.hpp"

namespace riskprune {

// Prunes every test query at the calibrated threshold, reranks the retained
// sets, and reports MRR@10, the mean metric loss (test risk), the mean
// retained size, and whether test risk <= alpha_effective. The per-query
// losses are computed directly (prune, rerank, score), independent of the
// loss-curve machinery.
TrialReport evaluate_test(const Dataset& test, const CalibrationResult& result);

struct TrialConfig {
  int n_trials = 100;
  size_t calib_size = 0;
  size_t test_size = 0;
  uint64_t master_seed = 1;
  int workers = 1;
  PrepOptions prep;
  CalibrateOptions calibration;
};

struct TrialsSummary {
  int n_trials = 0;
  double coverage = 0.0;         // fraction of trials meeting the constraint
  double mean_mrr = 0.0;
  double mean_size = 0.0;
  double mean_test_risk = 0.0;
  double mean_confidence = 0.0;  // mean of 1 - delta_effective
  double speedup = 0.0;          // pool_size / mean_size
  std::vector<TrialReport> trials;
};

// The coverage protocol: per trial, draw a disjoint calibration/test split
// without replacement (per-trial seed derived from master_seed by a counter
// scheme), refit preprocessing on the calibration half only, calibrate, and
// evaluate on the test half. Identical master_seed gives byte-identical
// reports; worker count never changes the output.
TrialsSummary run_trials(const Dataset& pool, const TrialConfig& cfg);

// Heuristic baseline: the largest threshold whose pruned-and-reranked
// calibration MRR@k still meets required_mrr, found on the exact breakpoint
// sweep. No guarantee attaches to it. nullopt when even the full set misses
// the target.
std::optional<Threshold> est_calibrate(const Dataset& calib, double required_mrr,
                                       int k = 10);

// Rank-cutoff analog: the smallest r such that keeping each query's top r
// candidates (by calibrated score) and reranking meets required_mrr on
// calibration data.
std::optional<int64_t> ert_calibrate(const Dataset& calib, double required_mrr,
                                     int k = 10);

enum class BaselineKind { est, ert };

struct BaselineTrial {
  int trial = 0;
  uint64_t seed = 0;
  double tuned = 0.0;  // threshold (est) or rank cutoff (ert)
  bool achievable = false;
  double mrr_at_10 = 0.0;
  double test_risk = 0.0;
  double mean_pruned_size = 0.0;
  bool constraint_satisfied = false;  // test MRR@k >= required_mrr
};

struct BaselineSummary {
  BaselineKind kind = BaselineKind::est;
  double required_mrr = 0.0;
  int n_trials = 0;
  double coverage = 0.0;
  double mean_mrr = 0.0;
  double mean_size = 0.0;
  std::vector<BaselineTrial> trials;
};

// Same splits and preprocessing as run_trials for the same master_seed, so
// baseline and certified coverage are comparable trial by trial. When the
// target is unachievable on calibration data the baseline falls back to the
// full set (threshold 0 / full-length cutoff).
BaselineSummary run_baseline_trials(const Dataset& pool, const TrialConfig& cfg,
                                    BaselineKind kind, double required_mrr);

struct TradeoffRow {
  double alpha = 0.0;
  double mean_mrr = 0.0;
  double mean_size = 0.0;
  double coverage = 0.0;
};

// run_trials across a list of risk levels, sharing each trial's split,
// preprocessing, and risk curve across all levels. Rows sorted by alpha
// ascending.
std::vector<TradeoffRow> tradeoff(const Dataset& pool, std::vector<double> alphas,
                                  const TrialConfig& cfg);

struct ConfidenceSweepRow {
  double alpha = 0.0;
  double corrected_confidence = 0.0;  // mean 1 - delta_effective
  double coverage = 0.0;
};

// Confidence-mode trials across a descending list of risk levels, again
// sharing per-trial state. Rows sorted by alpha descending.
std::vector<ConfidenceSweepRow> confidence_sweep(const Dataset& pool,
                                                 std::vector<double> alphas,
                                                 const TrialConfig& cfg);

}  // namespace riskprune
