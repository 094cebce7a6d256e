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

#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"
#include "naive_oracle.hpp"
#include "riskprune/metrics.hpp"
#include "riskprune/rng.hpp"
#include "riskprune/types.hpp"

using namespace riskprune;

namespace {

Candidate cand(std::string id, double cal, double fused) {
  Candidate c;
  c.doc_id = std::move(id);
  c.calibrated_score = cal;
  c.fused_score = fused;
  return c;
}

// Random record with heavy score ties; gold picked from the pool plus
// occasionally an id outside it.
QueryRecord random_record(Rng& rng, int max_n) {
  QueryRecord rec;
  rec.query_id = "q";
  const int n = 1 + static_cast<int>(rng.next_below(max_n));
  for (int i = 0; i < n; ++i) {
    rec.candidates.push_back(
        cand("d" + std::to_string(i),
             static_cast<double>(rng.next_below(6)) / 6.0,
             static_cast<double>(rng.next_below(4)) / 4.0));
  }
  const uint64_t gold_kind = rng.next_below(4);
  if (gold_kind == 0) {
    rec.gold_ids.push_back("missing");  // gold outside the pool
  } else if (gold_kind != 1) {          // kind 1 leaves the gold set empty
    const int g = 1 + static_cast<int>(rng.next_below(2));
    for (int i = 0; i < g; ++i) {
      rec.gold_ids.push_back(
          "d" + std::to_string(rng.next_below(static_cast<uint64_t>(n))));
    }
  }
  std::sort(rec.gold_ids.begin(), rec.gold_ids.end());
  rec.gold_ids.erase(std::unique(rec.gold_ids.begin(), rec.gold_ids.end()),
                     rec.gold_ids.end());
  sort_by_calibrated(rec);
  return rec;
}

const std::vector<double> kProbeTaus = {0.0,       1.0 / 6,  0.2, 2.0 / 6,
                                        0.5,       4.0 / 6,  0.7, 5.0 / 6,
                                        0.9999999, 1.0};

}  // namespace

TEST_CASE("reciprocal rank respects the cutoff") {
  const std::vector<std::string> gold = {"g"};
  CHECK(reciprocal_rank_at_k({{"g", "a", "b"}}, gold, 10) == 1.0);
  CHECK(reciprocal_rank_at_k({{"a", "b", "g"}}, gold, 10) == 1.0 / 3);
  CHECK(reciprocal_rank_at_k({{"a", "b", "g"}}, gold, 2) == 0.0);
  CHECK(reciprocal_rank_at_k({{"a", "b"}}, gold, 10) == 0.0);
  CHECK(reciprocal_rank_at_k({}, gold, 10) == 0.0);
}

TEST_CASE("pruned loss agrees with the reference, bit for bit") {
  Rng rng(13);
  for (const MetricSpec metric :
       {MetricSpec{}, MetricSpec{MetricSpec::Kind::mrr, 3},
        MetricSpec{MetricSpec::Kind::recall, 10}}) {
    for (int iter = 0; iter < 40; ++iter) {
      const QueryRecord rec = random_record(rng, 30);
      for (double tau : kProbeTaus) {
        CHECK(pruned_loss(rec, Threshold{tau}, metric) ==
              oracle::naive_loss(rec, tau, metric));
      }
    }
  }
}

TEST_CASE("loss curve evaluates to the reference loss everywhere") {
  Rng rng(17);
  for (const MetricSpec metric :
       {MetricSpec{}, MetricSpec{MetricSpec::Kind::recall, 10}}) {
    for (int iter = 0; iter < 40; ++iter) {
      const QueryRecord rec = random_record(rng, 25);
      const LossCurve curve = make_loss_curve(rec, metric);
      REQUIRE(curve.taus.size() == curve.losses.size());
      REQUIRE(curve.taus.size() == curve.counts.size());
      // Breakpoints themselves, midpoints between them, and both ends.
      std::vector<double> probes = curve.taus;
      for (size_t i = 0; i + 1 < curve.taus.size(); ++i) {
        probes.push_back(0.5 * (curve.taus[i] + curve.taus[i + 1]));
      }
      probes.push_back(0.0);
      probes.push_back(1.0);
      if (!curve.taus.empty()) {
        probes.push_back(std::min(1.0, curve.taus.front() + 0.01));
      }
      for (double tau : probes) {
        CHECK(curve.at(tau) == oracle::naive_loss(rec, tau, metric));
        CHECK(curve.count_at(tau) ==
              static_cast<int32_t>(oracle::naive_prune(rec, tau).size()));
      }
    }
  }
}

TEST_CASE("loss curve above the top score is the empty-set loss") {
  QueryRecord rec;
  rec.query_id = "q";
  rec.candidates = {cand("g", 0.6, 0.6)};
  rec.gold_ids = {"g"};
  const LossCurve curve = make_loss_curve(rec, MetricSpec{});
  CHECK(curve.at(0.7) == 1.0);
  CHECK(curve.count_at(0.7) == 0);
  CHECK(curve.segment_at(0.7) == -1);
  CHECK(curve.at(0.6) == 0.0);
  CHECK(curve.segment_at(0.6) == 0);
}

TEST_CASE("record with no candidates always loses") {
  QueryRecord rec;
  rec.query_id = "q";
  rec.gold_ids = {"g"};
  const LossCurve curve = make_loss_curve(rec, MetricSpec{});
  CHECK(curve.taus.empty());
  CHECK(curve.at(0.0) == 1.0);
  CHECK(curve.at(1.0) == 1.0);
  CHECK(pruned_loss(rec, Threshold{0.0}, MetricSpec{}) == 1.0);
}

TEST_CASE("monotone violation is detected") {
  // The distractor enters the retained set later (lower calibrated score)
  // but outranks the gold document after fusion, so widening the set makes
  // the loss worse.
  QueryRecord rec;
  rec.query_id = "q";
  rec.candidates = {cand("g", 0.9, 0.5), cand("d", 0.5, 0.9)};
  rec.gold_ids = {"g"};
  const LossCurve curve = make_loss_curve(rec, MetricSpec{});
  REQUIRE(curve.taus.size() == 2);
  CHECK(curve.losses[0] == 0.0);
  CHECK(curve.losses[1] == 0.5);
  CHECK(curve.monotone_violated);

  QueryRecord clean;
  clean.query_id = "q";
  clean.candidates = {cand("d", 0.9, 0.9), cand("g", 0.5, 0.5)};
  clean.gold_ids = {"g"};
  CHECK_FALSE(make_loss_curve(clean, MetricSpec{}).monotone_violated);
}

TEST_CASE("prefix losses agree with the reference") {
  Rng rng(19);
  for (const MetricSpec metric :
       {MetricSpec{}, MetricSpec{MetricSpec::Kind::recall, 10}}) {
    for (int iter = 0; iter < 30; ++iter) {
      const QueryRecord rec = random_record(rng, 20);
      const std::vector<double> lp = loss_by_prefix(rec, metric);
      REQUIRE(lp.size() == rec.candidates.size() + 1);
      for (size_t r = 0; r < lp.size(); ++r) {
        CHECK(lp[r] == oracle::naive_prefix_loss(rec, r, metric));
      }
    }
  }
}

TEST_CASE("dataset MRR is the mean reciprocal rank with full pools") {
  Dataset data;
  QueryRecord a;
  a.query_id = "a";
  a.candidates = {cand("g", 0.9, 0.9), cand("x", 0.5, 0.5)};
  a.gold_ids = {"g"};
  QueryRecord b;
  b.query_id = "b";
  b.candidates = {cand("x", 0.9, 0.9), cand("g", 0.5, 0.5)};
  b.gold_ids = {"g"};
  QueryRecord c;  // no gold in pool
  c.query_id = "c";
  c.candidates = {cand("x", 0.9, 0.9)};
  c.gold_ids = {"zz"};
  data.records = {a, b, c};
  data.meta.pool_size = 2;
  CHECK(mrr_at_k(data, 10) == doctest::Approx((1.0 + 0.5 + 0.0) / 3).epsilon(1e-12));
  CHECK(mrr_at_k(data, 1) == doctest::Approx((1.0 + 0.0 + 0.0) / 3).epsilon(1e-12));
}

TEST_CASE("loss vector walks queries in dataset order") {
  Dataset data;
  for (int i = 0; i < 5; ++i) {
    QueryRecord rec;
    rec.query_id = "q" + std::to_string(i);
    rec.candidates = {cand("g", 0.5 + 0.1 * i, 0.9)};
    rec.gold_ids = {i % 2 == 0 ? "g" : "zz"};
    data.records.push_back(rec);
  }
  const std::vector<double> v =
      loss_vector(data, Threshold{0.0}, MetricSpec{});
  REQUIRE(v.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(v[static_cast<size_t>(i)] == (i % 2 == 0 ? 0.0 : 1.0));
  }
}

TEST_CASE("metric names parse and print") {
  CHECK(metric_from_string("mrr@10").kind == MetricSpec::Kind::mrr);
  CHECK(metric_from_string("mrr@10").k == 10);
  CHECK(metric_from_string("mrr@3").k == 3);
  CHECK(metric_from_string("recall").kind == MetricSpec::Kind::recall);
  CHECK(MetricSpec{}.name() == "mrr@10");
  CHECK(MetricSpec{MetricSpec::Kind::recall, 10}.name() == "recall");
  CHECK_THROWS(metric_from_string("ndcg@10"));
  CHECK_THROWS(metric_from_string("mrr@0"));
}
