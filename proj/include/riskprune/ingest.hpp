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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "riskprune/types.hpp"

namespace riskprune {

// One line of a TREC-style run file: qid Q0 docid rank score tag.
struct RunEntry {
  std::string query_id;
  std::string doc_id;
  int rank = 0;
  double score = 0.0;
  std::string tag;
};

// Relevance judgments. gold maps a query to its sorted, deduplicated gold
// doc ids (relevance >= 1); judged counts every judged pair including
// relevance-0 rows.
struct Qrels {
  std::unordered_map<std::string, std::vector<std::string>> gold;
  int64_t judged = 0;
};

// Parses a run file. Entries come back grouped by query in order of first
// appearance, each group sorted by rank ascending. Malformed lines,
// duplicate (query, doc) pairs, duplicate ranks within a query, and
// non-finite scores are parse errors naming the line number.
std::vector<RunEntry> parse_run(std::istream& in, std::string_view name);
std::vector<RunEntry> parse_run_file(const std::string& path);

// Parses a qrels file (qid iteration docid relevance).
Qrels parse_qrels(std::istream& in, std::string_view name);
Qrels parse_qrels_file(const std::string& path);

// Joins the two runs and the judgments into a Dataset: per query the top
// pool_size retriever candidates by rank, reranker scores matched on
// (query, doc) with -inf for candidates the reranker never scored. Every
// reranker entry must name a (query, doc) pair that exists somewhere in the
// retriever run. Queries absent from the qrels keep an empty gold set.
Dataset build_dataset(const std::vector<RunEntry>& retriever_run,
                      const std::vector<RunEntry>& reranker_run,
                      const Qrels& qrels, int pool_size);

// Maps a raw score to a probability: 1 / (1 + exp(a * s + b)).
struct PlattModel {
  double a = 0.0;
  double b = 0.0;

  double apply(double s) const;
};

// Maximum-likelihood logistic fit by damped Newton iteration, converging on
// parameter change below 1e-8 or 100 iterations. Constant scores fall back
// to an intercept-only fit (a = 0, probability = positive rate). All-one-
// class labels are a domain error telling the caller to skip calibration
// scaling.
PlattModel fit_platt(std::span<const double> scores,
                     std::span<const uint8_t> labels);

// Applies a calibration model to every retriever score and restores the
// (calibrated desc, doc_id asc) candidate order.
void apply_platt(Dataset& dataset, const PlattModel& model);

// Evidence fusion: fused = beta * calibrated + (1 - beta) * normalized
// reranker score, where normalization maps [rr_min, rr_max] onto [0, 1].
// Sentinel (-inf) reranker scores stay -inf so unscored candidates sort
// last, except at beta = 1 where the reranker is ignored entirely.
void fuse(Dataset& dataset, double beta, double rr_min, double rr_max);

struct BetaSearchResult {
  double beta = 1.0;
  double mrr = 0.0;
};

// Grid search for the fusion weight maximizing full-set reranked MRR@k on
// this dataset, ties broken toward the smaller beta. The dataset needs
// calibrated scores; fusion is evaluated on the fly and the dataset is not
// modified.
BetaSearchResult search_beta(const Dataset& calibrated, double rr_min,
                             double rr_max, double step = 0.01, int k = 10);

struct PrepOptions {
  std::optional<double> fixed_beta;
  double beta_step = 0.01;
  int mrr_k = 10;
};

// Fits calibration scaling and the fusion weight on this dataset and applies
// them to it. When probability calibration is impossible (one-class labels)
// the retriever scores are min-max normalized instead, which preserves their
// order. Returns the transform so it can be replayed on held-out data.
Preprocess fit_apply_preprocess(Dataset& calib, const PrepOptions& opts = {});

// Replays a previously fitted transform on another dataset.
void apply_preprocess(Dataset& dataset, const Preprocess& prep);

}  // namespace riskprune
