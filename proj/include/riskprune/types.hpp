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

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace riskprune {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// One retrieved document for one query. Scores fill in as the pipeline runs:
// retriever_score comes straight from the first-stage run, calibrated_score
// exists once probability calibration has been applied, reranker_score comes
// from the reranker run (-inf marks a candidate the reranker never scored),
// and fused_score exists only after evidence fusion. Absent scores are NaN,
// never zero: a zero would silently act like a real score downstream.
struct Candidate {
  std::string doc_id;
  double retriever_score = 0.0;
  double calibrated_score = std::numeric_limits<double>::quiet_NaN();
  double reranker_score = kNegInf;
  double fused_score = std::numeric_limits<double>::quiet_NaN();

  bool has_calibrated() const { return !std::isnan(calibrated_score); }
  bool has_fused() const { return !std::isnan(fused_score); }
  bool has_reranker() const { return reranker_score != kNegInf; }
};

// A query with its candidate pool. Candidates are kept sorted by
// (calibrated_score desc, doc_id asc) once calibrated scores exist, and by
// (retriever_score desc, doc_id asc) before that, so pruning is always a
// prefix. gold_ids is sorted for binary search and deterministic output; it
// may name documents outside the pool (or be empty), in which case the query
// still participates in every mean and contributes total loss.
struct QueryRecord {
  std::string query_id;
  std::vector<Candidate> candidates;
  std::vector<std::string> gold_ids;  // sorted ascending, unique

  bool is_gold(std::string_view doc_id) const;
  bool gold_in_pool() const;
};

struct DatasetMeta {
  std::string source;
  int pool_size = 0;
  bool calibrated = false;
  bool fused = false;
  double beta = std::numeric_limits<double>::quiet_NaN();
  int64_t missing_reranker = 0;   // candidates with no reranker score
  int64_t queries_no_gold = 0;    // queries whose gold set misses the pool
};

struct Dataset {
  std::vector<QueryRecord> records;
  DatasetMeta meta;
};

// Pruning threshold on the calibrated-score axis, in [0, 1]. Larger values
// keep fewer candidates.
struct Threshold {
  double tau = 0.0;
};

// Empirical risk, its upper confidence bound, and mean retained-set size as
// step functions of the threshold, evaluated on a descending grid.
struct RiskCurve {
  std::vector<double> thresholds;      // strictly descending
  std::vector<double> empirical_risk;  // in [0, 1]
  std::vector<double> ucb;             // >= empirical_risk, <= 1
  std::vector<double> mean_size;       // non-decreasing along the array
  double delta = 0.0;
  size_t m = 0;  // calibration queries
};

enum class CorrectionMode { none, risk, confidence, both };

// Transformations fitted on calibration data that must be replayed verbatim
// on test data: probability calibration of the retriever score, min-max
// normalization of the reranker score, and the fusion weight.
struct Preprocess {
  bool platt = false;       // false means min-max fallback on retriever scores
  double platt_a = 0.0;
  double platt_b = 0.0;
  double retriever_min = 0.0;  // fallback normalization bounds
  double retriever_max = 0.0;
  double reranker_min = 0.0;
  double reranker_max = 0.0;
  double beta = 1.0;
  double beta_mrr = std::numeric_limits<double>::quiet_NaN();
};

struct CalibrationResult {
  Threshold threshold;
  double alpha_requested = 0.0;
  double alpha_effective = 0.0;
  double delta_requested = 0.0;
  double delta_effective = 0.0;
  CorrectionMode correction = CorrectionMode::none;
  bool achievable = false;

  // Diagnostics at the selected threshold and for the run as a whole.
  double empirical_risk_at_threshold = 0.0;
  double ucb_at_threshold = 0.0;
  double mean_size_at_threshold = 0.0;
  size_t m = 0;
  int64_t queries_no_gold = 0;
  double monotone_violation_fraction = 0.0;
  std::string metric;
  double grid_step = 0.0;  // 0 means exact breakpoint grid
  size_t grid_points = 0;
  std::string wsr_variant;
  std::optional<uint64_t> wsr_shuffle_seed;
  std::optional<double> ucb_dataset_order;  // order sensitivity, when shuffled

  // Filled by report-both correction: the enlarged-miscoverage alternative
  // alongside the primary relaxed-risk pairing.
  std::optional<double> delta_corrected;
  std::optional<double> threshold_at_delta_corrected;

  std::optional<Preprocess> preprocess;
};

struct TrialReport {
  int trial = 0;
  uint64_t seed = 0;
  double mrr_at_10 = 0.0;
  double test_risk = 0.0;  // mean per-query loss on the test half
  double mean_pruned_size = 0.0;
  bool constraint_satisfied = false;
  CalibrationResult calibration;
};

// Candidates ordered for pruning: calibrated score descending, doc_id
// ascending on ties. Requires calibrated scores on every candidate.
void sort_by_calibrated(QueryRecord& record);

// Pre-calibration ordering used at ingest time.
void sort_by_retriever(QueryRecord& record);

// The retained set at threshold tau: every candidate with calibrated score
// >= tau. Returns a prefix view of the record's candidate vector.
std::span<const Candidate> prune(const QueryRecord& record, Threshold t);

// Second-stage ordering of a retained set: fused score descending, doc_id
// ascending on ties. Errors if any candidate lacks a fused score.
std::vector<Candidate> rerank(std::span<const Candidate> retained,
                              std::string_view query_id = {});

// Comparator used everywhere a fused ordering is needed.
inline bool fused_before(const Candidate& a, const Candidate& b) {
  if (a.fused_score != b.fused_score) return a.fused_score > b.fused_score;
  return a.doc_id < b.doc_id;
}

inline bool calibrated_before(const Candidate& a, const Candidate& b) {
  if (a.calibrated_score != b.calibrated_score)
    return a.calibrated_score > b.calibrated_score;
  return a.doc_id < b.doc_id;
}

const char* to_string(CorrectionMode mode);
CorrectionMode correction_mode_from_string(std::string_view s);

}  // namespace riskprune
