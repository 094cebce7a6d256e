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

#include <iosfwd>
#include <optional>
#include <vector>

#include "riskprune/bounds.hpp"
#include "riskprune/metrics.hpp"
#include "riskprune/types.hpp"

namespace riskprune {

// Descending threshold grid 1, (n-1)/n, ..., 1/n, 0 where n = round(1/step).
// Endpoints are exact; every value lies in [0, 1].
std::vector<double> make_grid(double step);

struct LossCurveSet {
  std::vector<LossCurve> curves;  // one per query, dataset order
  MetricSpec metric;

  size_t m() const { return curves.size(); }
};

// One loss curve per query. Errors on an empty dataset and when candidates
// lack the scores the metric needs.
LossCurveSet build_loss_curves(const Dataset& dataset, const MetricSpec& metric);

struct RiskCurveOptions {
  double delta = 0.1;
  double grid_step = 1e-4;  // 0 selects the exact breakpoint union
  WsrVariant wsr = WsrVariant::predictable;
  bool hoeffding = false;  // closed-form baseline bound instead
  // Applied once to the query order before the bound; the bound depends on
  // sample order, so this measures (and tests) order sensitivity.
  std::optional<uint64_t> shuffle_seed;
  int workers = 1;
};

// Empirical risk, upper confidence bound, and mean retained size at every
// grid threshold. Empirical risk is the dataset-order mean of per-query
// losses read off the precomputed loss curves; the bound is evaluated from
// the same per-query loss vector at each grid point and never drops below
// the empirical risk (a confidence bound under the point estimate carries no
// information, so it is lifted to the estimate). Worker count never changes
// the output.
RiskCurve build_risk_curve(const LossCurveSet& set, const RiskCurveOptions& opts);

// Empirical risk and mean size at every breakpoint (no bound), maintained
// incrementally through one global merge sweep. This is the fast exact path:
// O(total breakpoints log total breakpoints).
struct RiskSweep {
  std::vector<double> thresholds;
  std::vector<double> empirical_risk;
  std::vector<double> mean_size;
};
RiskSweep exact_risk_sweep(const LossCurveSet& set);

// Largest threshold whose entire suffix (it and every smaller grid
// threshold) has ucb strictly below alpha; nullopt when even the last grid
// point (the largest retained set) fails. Scans from the largest-set end.
std::optional<Threshold> select_threshold(const RiskCurve& curve, double alpha);
std::optional<size_t> select_threshold_index(const RiskCurve& curve, double alpha);

// Fallback when no threshold is certifiable at alpha: relax the risk target
// to the best certifiable one.
struct RiskCorrection {
  double alpha_c = 1.0;    // min over the grid of ucb
  Threshold threshold;     // smallest threshold attaining it within 1e-12
  size_t index = 0;
};
RiskCorrection correct_risk(const RiskCurve& curve, double alpha);

// Fallback that enlarges the miscoverage budget instead: scan delta_c
// upward from the curve's delta in steps of 0.01 (capped at exactly 1) until
// some threshold satisfies the suffix condition at alpha. Feasibility at a
// given delta_c is equivalent to the last grid point's bound dropping below
// alpha, so the scan costs one bound evaluation per step; the full curve is
// rebuilt only at the accepted delta_c. When even delta_c = 1 fails (alpha
// at or below the empirical floor), returns delta_c = 1 with the original
// curve's minimum-ucb threshold and achieved = false.
struct ConfidenceCorrection {
  double delta_c = 1.0;
  Threshold threshold;
  size_t index = 0;
  bool achieved = false;
  RiskCurve curve;  // rebuilt at delta_c when achieved, else the base curve
};
ConfidenceCorrection correct_confidence(const LossCurveSet& set,
                                        const RiskCurve& base,
                                        double alpha,
                                        const RiskCurveOptions& opts);

struct CalibrateOptions {
  double alpha = 0.1;
  double delta = 0.1;
  CorrectionMode mode = CorrectionMode::both;
  MetricSpec metric;
  double grid_step = 1e-4;
  WsrVariant wsr = WsrVariant::predictable;
  bool hoeffding = false;
  std::optional<uint64_t> shuffle_seed;
  int workers = 1;
};

// The full calibration procedure: loss curves, risk curve, threshold
// selection, and the requested correction when selection fails. When
// out_curve is non-null it receives the risk curve the reported threshold
// was selected on (the delta_c curve after a confidence correction).
CalibrationResult calibrate(const Dataset& calib, const CalibrateOptions& opts,
                            RiskCurve* out_curve = nullptr);

// Selection and correction on an already-built curve. Lets trial loops build
// loss curves and the base risk curve once per split and then answer many
// risk levels cheaply; opts must describe the same delta/grid/bound the
// curve was built with. queries_no_gold is carried into the result.
CalibrationResult finish_calibration(const LossCurveSet& curves,
                                     const RiskCurve& curve,
                                     const CalibrateOptions& opts,
                                     int64_t queries_no_gold,
                                     RiskCurve* out_curve = nullptr);

// CSV export: threshold,empirical_risk,ucb,mean_size.
void write_curve_csv(const RiskCurve& curve, std::ostream& out);
// CSV export: threshold,empirical_risk,mean_size.
void write_sweep_csv(const RiskSweep& sweep, std::ostream& out);

}  // namespace riskprune
