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

#include <string>
#include <vector>

#include "riskprune/evaluate.hpp"
#include "riskprune/types.hpp"

// String-level JSON and CSV conversions. Every JSON document carries a
// "schema" tag so files stay self-describing; parsers reject unknown tags.
// The JSON library stays an implementation detail of this module.

namespace riskprune {

// "riskprune.calibration.v1". Round-trips every field, including the fitted
// preprocessing, so a calibration saved here can be replayed on other data.
std::string calibration_to_json(const CalibrationResult& result);
CalibrationResult calibration_from_json(const std::string& text);
CalibrationResult calibration_from_json_file(const std::string& path);

// One "riskprune.trial.v1" object per line, calibration embedded.
std::string trial_to_json_line(const TrialReport& report);

// "riskprune.trials-summary.v1", aggregates only.
std::string trials_summary_to_json(const TrialsSummary& summary);

// "riskprune.baseline-summary.v1" and one "riskprune.baseline-trial.v1" per
// line.
std::string baseline_summary_to_json(const BaselineSummary& summary);
std::string baseline_trial_to_json_line(const BaselineSummary& summary,
                                        const BaselineTrial& trial);

// "riskprune.dataset-stats.v1": row counts and meta for a loaded dataset.
std::string dataset_stats_json(const Dataset& dataset);

// The fitted-transform block on its own, as exchanged over the C API.
std::string preprocess_to_json(const Preprocess& prep);
Preprocess preprocess_from_json(const std::string& text);

// CSV with a header row; doubles in shortest round-trip form.
std::string tradeoff_to_csv(const std::vector<TradeoffRow>& rows);
std::string confidence_sweep_to_csv(const std::vector<ConfidenceSweepRow>& rows);

const char* baseline_kind_name(BaselineKind kind);
BaselineKind baseline_kind_from_string(std::string_view s);

}  // namespace riskprune
