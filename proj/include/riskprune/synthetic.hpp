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
#include <string>

#include "riskprune/metrics.hpp"
#include "riskprune/types.hpp"

namespace riskprune {

// consistent: reranker score equals the raw retriever score, so the fused
//   order always matches the retriever order. noisy: independent Gaussian
//   perturbation. adversarial: per query, the distractor with the lowest
//   retriever score is planted with a reranker score above everything else.
enum class RerankerMode { consistent, noisy, adversarial };

// Two-stage ranking systems with controllable difficulty. Raw scores are
// conditionally Gaussian (distractors at 0, gold shifted by gap, common
// spread noise), which makes the true probability-of-gold map exactly
// logistic in the raw score with known coefficients, so probability
// calibration is well-specified and testable against ground truth. The
// embedding mode instead places unit vectors on a sphere and scores by dot
// product (gold documents are pulled toward the query vector).
struct SynthConfig {
  int64_t n_queries = 1000;
  int pool_size = 100;
  int n_gold = 1;      // golds per query
  int n_gold_max = 0;  // > n_gold: uniform count in [n_gold, n_gold_max]
  double gap = 2.0;    // gold score shift
  double noise = 1.0;  // conditional score spread
  RerankerMode reranker = RerankerMode::consistent;
  double reranker_noise = 0.5;
  bool embedding = false;
  int embedding_dim = 16;
  uint64_t seed = 1;

  void validate() const;
};

RerankerMode reranker_mode_from_string(const std::string& s);
std::string to_string(RerankerMode mode);

// Deterministic per (config, seed); queries are seeded independently so any
// generation order yields the same dataset. The dataset carries raw
// retriever and reranker scores only; calibration and fusion happen
// downstream, exactly as for ingested runs.
Dataset generate(const SynthConfig& config);

// Attaches the analytically known calibration (the true posterior
// probability that a candidate is gold given its raw score; in embedding
// mode the affine map of the dot product onto [0, 1]) and the canonical
// fusion at the given weight. Used by oracles that need ground-truth scores
// rather than fitted ones.
void apply_canonical(Dataset& dataset, const SynthConfig& config,
                     double beta = 0.0);

struct TrueRisk {
  double estimate = 0.0;
  double standard_error = 0.0;
};

// Monte-Carlo estimate of the population risk at threshold tau for the
// canonical system (canonical calibration pruned at tau, reranked by the
// canonical fusion at beta). Draws fresh queries from a stream disjoint
// from generate()'s.
TrueRisk true_risk(const SynthConfig& config, Threshold tau,
                   int64_t n_monte_carlo,
                   const MetricSpec& metric = MetricSpec{},
                   double beta = 0.0);

}  // namespace riskprune
