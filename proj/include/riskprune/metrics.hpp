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
#include <span>
#include <string>
#include <vector>

#include "riskprune/types.hpp"

namespace riskprune {

// What a "bad" pruned set costs. mrr: one minus the truncated reciprocal
// rank of the reranked retained set. recall: one when no gold document
// survives pruning, zero otherwise (reranking order is irrelevant).
struct MetricSpec {
  enum class Kind { mrr, recall };
  Kind kind = Kind::mrr;
  int k = 10;

  std::string name() const;
};

MetricSpec metric_from_string(std::string_view s);

// 1/rank of the best-ranked gold document, or 0 when the best rank exceeds k
// or no gold is present. ranked is the already-ordered candidate list.
double reciprocal_rank_at_k(std::span<const std::string> ranked,
                            std::span<const std::string> sorted_gold, int k);

// Mean reciprocal rank over a full dataset at the given cutoff, with every
// candidate retained and ordered by fused score. Queries without gold in the
// pool (or with no gold at all) contribute zero.
double mrr_at_k(const Dataset& dataset, int k);

// Loss of the pruned-then-reranked set for one query at one threshold.
double pruned_loss(const QueryRecord& record, Threshold t,
                   const MetricSpec& metric);

// Per-query loss as a step function of the threshold. taus holds the
// distinct calibrated scores in descending order; losses[i] is the loss once
// every candidate scoring >= taus[i] is retained; counts[i] is how many
// candidates that is. Above taus.front() the retained set is empty and the
// loss is 1. The curve has at most one segment per distinct score plus the
// implicit empty segment.
struct LossCurve {
  std::vector<double> taus;
  std::vector<double> losses;
  std::vector<int32_t> counts;
  bool monotone_violated = false;  // loss ever increased as tau decreased

  double at(double tau) const;
  int32_t count_at(double tau) const;
  // Index of the segment active at tau: -1 for the empty prefix.
  ptrdiff_t segment_at(double tau) const;
};

// Builds the curve in one sweep over the candidate list, inserting
// candidates in calibrated order and re-reading the best gold rank after
// each tie group. O(n log n) per query.
LossCurve make_loss_curve(const QueryRecord& record, const MetricSpec& metric);

// Loss after retaining exactly the top r candidates, for r = 0..n. Feeds the
// rank-cutoff baseline, which may split calibrated-score ties.
std::vector<double> loss_by_prefix(const QueryRecord& record,
                                   const MetricSpec& metric);

// Per-query losses at a fixed threshold, in dataset order.
std::vector<double> loss_vector(const Dataset& dataset, Threshold t,
                                const MetricSpec& metric);

}  // namespace riskprune
