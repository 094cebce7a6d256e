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

#include "riskprune/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>

#include "riskprune/error.hpp"

namespace riskprune {

namespace {

class Fenwick {
 public:
  void reset(size_t n) { tree_.assign(n + 1, 0); }

  void add(int pos) {
    for (int i = pos + 1; i < static_cast<int>(tree_.size()); i += i & -i)
      tree_[i] += 1;
  }

  int count_le(int pos) const {
    int s = 0;
    for (int i = pos + 1; i > 0; i -= i & -i) s += tree_[i];
    return s;
  }

 private:
  std::vector<int32_t> tree_;
};

double loss_from_rank(int rank, int k) {
  // rank 0 means no gold retained.
  if (rank == 0 || rank > k) return 1.0;
  return 1.0 - 1.0 / static_cast<double>(rank);
}

void require_fused(const QueryRecord& record) {
  for (const Candidate& c : record.candidates) {
    if (!c.has_fused())
      throw_domain("candidate " + c.doc_id + " in query " + record.query_id +
                   " has no fused score");
  }
}

void require_calibrated_order(const QueryRecord& record) {
  for (size_t i = 0; i < record.candidates.size(); ++i) {
    if (!record.candidates[i].has_calibrated())
      throw_domain("query " + record.query_id +
                   " has candidates without calibrated scores");
    if (i > 0 &&
        calibrated_before(record.candidates[i], record.candidates[i - 1]))
      throw_domain("query " + record.query_id +
                   " is not sorted by calibrated score");
  }
}

// Rank of the best gold document within the retained prefix under the fused
// ordering, or 0 when no gold is retained. Linear two-pass scan.
int best_gold_rank(std::span<const Candidate> retained,
                   const QueryRecord& record) {
  const Candidate* best = nullptr;
  for (const Candidate& c : retained) {
    if (record.is_gold(c.doc_id) && (!best || fused_before(c, *best)))
      best = &c;
  }
  if (!best) return 0;
  int rank = 1;
  for (const Candidate& c : retained) {
    if (&c != best && fused_before(c, *best)) ++rank;
  }
  return rank;
}

}  // namespace

std::string MetricSpec::name() const {
  if (kind == Kind::recall) return "recall";
  return "mrr@" + std::to_string(k);
}

MetricSpec metric_from_string(std::string_view s) {
  if (s == "recall") return {MetricSpec::Kind::recall, 0};
  if (s.rfind("mrr@", 0) == 0) {
    int k = 0;
    auto digits = s.substr(4);
    auto [ptr, ec] =
        std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec == std::errc() && ptr == digits.data() + digits.size() && k >= 1)
      return {MetricSpec::Kind::mrr, k};
  }
  throw_invalid("unknown metric: " + std::string(s) +
                " (expected mrr@K or recall)");
}

double reciprocal_rank_at_k(std::span<const std::string> ranked,
                            std::span<const std::string> sorted_gold, int k) {
  if (k < 1) throw_invalid("rank cutoff must be >= 1");
  size_t limit = std::min<size_t>(ranked.size(), static_cast<size_t>(k));
  for (size_t i = 0; i < limit; ++i) {
    if (std::binary_search(sorted_gold.begin(), sorted_gold.end(), ranked[i]))
      return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

double mrr_at_k(const Dataset& dataset, int k) {
  if (dataset.records.empty()) throw_domain("dataset has no queries");
  double acc = 0.0;
  for (const QueryRecord& rec : dataset.records) {
    require_fused(rec);
    int rank = best_gold_rank({rec.candidates.data(), rec.candidates.size()},
                              rec);
    if (rank >= 1 && rank <= k) acc += 1.0 / static_cast<double>(rank);
  }
  return acc / static_cast<double>(dataset.records.size());
}

double pruned_loss(const QueryRecord& record, Threshold t,
                   const MetricSpec& metric) {
  std::span<const Candidate> retained = prune(record, t);
  if (metric.kind == MetricSpec::Kind::recall) {
    for (const Candidate& c : retained) {
      if (record.is_gold(c.doc_id)) return 0.0;
    }
    return 1.0;
  }
  require_fused(record);
  return loss_from_rank(best_gold_rank(retained, record), metric.k);
}

ptrdiff_t LossCurve::segment_at(double tau) const {
  auto it = std::partition_point(taus.begin(), taus.end(),
                                 [&](double s) { return s >= tau; });
  return (it - taus.begin()) - 1;
}

double LossCurve::at(double tau) const {
  ptrdiff_t seg = segment_at(tau);
  return seg < 0 ? 1.0 : losses[seg];
}

int32_t LossCurve::count_at(double tau) const {
  ptrdiff_t seg = segment_at(tau);
  return seg < 0 ? 0 : counts[seg];
}

LossCurve make_loss_curve(const QueryRecord& record,
                          const MetricSpec& metric) {
  require_calibrated_order(record);
  const size_t n = record.candidates.size();
  LossCurve curve;
  if (n == 0) return curve;

  const bool recall = metric.kind == MetricSpec::Kind::recall;
  std::vector<int> fpos;
  Fenwick fen;
  if (!recall) {
    require_fused(record);
    // Position of each candidate in the fused ordering; ranks inside any
    // retained prefix follow from counting smaller positions.
    std::vector<int> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return fused_before(record.candidates[a], record.candidates[b]);
    });
    fpos.resize(n);
    for (size_t r = 0; r < n; ++r) fpos[order[r]] = static_cast<int>(r);
    fen.reset(n);
  }

  curve.taus.reserve(n);
  curve.losses.reserve(n);
  curve.counts.reserve(n);

  int min_gold_fpos = -1;
  bool gold_seen = false;
  double prev_loss = 1.0;
  for (size_t i = 0; i < n; ++i) {
    const Candidate& c = record.candidates[i];
    bool gold = record.is_gold(c.doc_id);
    if (recall) {
      gold_seen = gold_seen || gold;
    } else {
      fen.add(fpos[i]);
      if (gold && (min_gold_fpos < 0 || fpos[i] < min_gold_fpos))
        min_gold_fpos = fpos[i];
    }
    // Close the tie group only when the next score differs, so candidates
    // sharing a calibrated score enter the curve together.
    bool group_end = (i + 1 == n) || (record.candidates[i + 1].calibrated_score !=
                                      c.calibrated_score);
    if (!group_end) continue;

    double loss;
    if (recall) {
      loss = gold_seen ? 0.0 : 1.0;
    } else if (min_gold_fpos < 0) {
      loss = 1.0;
    } else {
      loss = loss_from_rank(fen.count_le(min_gold_fpos), metric.k);
    }
    curve.taus.push_back(c.calibrated_score);
    curve.losses.push_back(loss);
    curve.counts.push_back(static_cast<int32_t>(i + 1));
    if (loss > prev_loss) curve.monotone_violated = true;
    prev_loss = loss;
  }
  return curve;
}

std::vector<double> loss_by_prefix(const QueryRecord& record,
                                   const MetricSpec& metric) {
  require_calibrated_order(record);
  const size_t n = record.candidates.size();
  std::vector<double> out;
  out.reserve(n + 1);
  out.push_back(1.0);

  const bool recall = metric.kind == MetricSpec::Kind::recall;
  std::vector<int> fpos;
  Fenwick fen;
  if (!recall) {
    require_fused(record);
    std::vector<int> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return fused_before(record.candidates[a], record.candidates[b]);
    });
    fpos.resize(n);
    for (size_t r = 0; r < n; ++r) fpos[order[r]] = static_cast<int>(r);
    fen.reset(n);
  }

  int min_gold_fpos = -1;
  bool gold_seen = false;
  for (size_t i = 0; i < n; ++i) {
    const Candidate& c = record.candidates[i];
    bool gold = record.is_gold(c.doc_id);
    if (recall) {
      gold_seen = gold_seen || gold;
      out.push_back(gold_seen ? 0.0 : 1.0);
      continue;
    }
    fen.add(fpos[i]);
    if (gold && (min_gold_fpos < 0 || fpos[i] < min_gold_fpos))
      min_gold_fpos = fpos[i];
    if (min_gold_fpos < 0) {
      out.push_back(1.0);
    } else {
      out.push_back(loss_from_rank(fen.count_le(min_gold_fpos), metric.k));
    }
  }
  return out;
}

std::vector<double> loss_vector(const Dataset& dataset, Threshold t,
                                const MetricSpec& metric) {
  std::vector<double> out;
  out.reserve(dataset.records.size());
  for (const QueryRecord& rec : dataset.records)
    out.push_back(pruned_loss(rec, t, metric));
  return out;
}

}  // namespace riskprune
