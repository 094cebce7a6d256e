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

#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "riskprune/error.hpp"
#include "riskprune/evaluate.hpp"
#include "riskprune/rng.hpp"
#include "riskprune/synthetic.hpp"
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

QueryRecord single(std::string qid, double cal, bool gold) {
  QueryRecord rec;
  rec.query_id = std::move(qid);
  rec.candidates = {cand("g", cal, cal)};
  rec.gold_ids = gold ? std::vector<std::string>{"g"}
                      : std::vector<std::string>{"zz"};
  return rec;
}

Dataset raw_pool(int n_queries, double gap = 2.0, uint64_t seed = 5) {
  SynthConfig cfg;
  cfg.n_queries = n_queries;
  cfg.pool_size = 10;
  cfg.gap = gap;
  cfg.seed = seed;
  return generate(cfg);
}

TrialConfig small_trials() {
  TrialConfig cfg;
  cfg.n_trials = 4;
  cfg.calib_size = 80;
  cfg.test_size = 60;
  cfg.master_seed = 9;
  cfg.calibration.alpha = 0.5;
  cfg.calibration.delta = 0.2;
  cfg.calibration.grid_step = 0.05;
  return cfg;
}

bool same_summary(const TrialsSummary& a, const TrialsSummary& b) {
  if (a.n_trials != b.n_trials) return false;
  if (a.coverage != b.coverage) return false;
  if (a.mean_mrr != b.mean_mrr) return false;
  if (a.mean_size != b.mean_size) return false;
  if (a.mean_test_risk != b.mean_test_risk) return false;
  if (a.mean_confidence != b.mean_confidence) return false;
  if (a.speedup != b.speedup) return false;
  for (size_t i = 0; i < a.trials.size(); ++i) {
    const TrialReport& x = a.trials[i];
    const TrialReport& y = b.trials[i];
    if (x.trial != y.trial || x.seed != y.seed) return false;
    if (x.mrr_at_10 != y.mrr_at_10 || x.test_risk != y.test_risk) return false;
    if (x.mean_pruned_size != y.mean_pruned_size) return false;
    if (x.constraint_satisfied != y.constraint_satisfied) return false;
    if (x.calibration.threshold.tau != y.calibration.threshold.tau)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("test evaluation prunes, reranks, and scores by hand rules") {
  Dataset test;
  test.meta.pool_size = 1;
  test.meta.calibrated = true;
  test.meta.fused = true;
  test.records = {single("a", 0.8, true), single("b", 0.9, true),
                  single("c", 0.2, true), single("d", 0.8, false)};

  CalibrationResult result;
  result.threshold = Threshold{0.5};
  result.alpha_effective = 0.5;
  result.metric = "mrr@10";

  const TrialReport rep = evaluate_test(test, result);
  // Losses: a 0, b 0, c 1 (pruned away), d 1 (gold absent). Risk 1/2.
  CHECK(rep.test_risk == 0.5);
  CHECK(rep.mrr_at_10 == 0.5);
  CHECK(rep.mean_pruned_size == 0.75);  // c retains nothing
  CHECK(rep.constraint_satisfied);      // 0.5 <= 0.5, inclusive

  result.alpha_effective = 0.49;
  CHECK_FALSE(evaluate_test(test, result).constraint_satisfied);

  // Recall metric: c still loses (gold pruned away), d loses, a and b win.
  result.metric = "recall";
  const TrialReport rec = evaluate_test(test, result);
  CHECK(rec.test_risk == 0.5);
  CHECK(rec.mrr_at_10 == 0.5);  // MRR@10 is reported regardless of metric
}

TEST_CASE("trial runs are deterministic and worker-independent") {
  const Dataset pool = raw_pool(150);
  const TrialConfig cfg = small_trials();
  const TrialsSummary a = run_trials(pool, cfg);
  const TrialsSummary b = run_trials(pool, cfg);
  TrialConfig threaded = cfg;
  threaded.workers = 3;
  const TrialsSummary c = run_trials(pool, threaded);
  CHECK(same_summary(a, b));
  CHECK(same_summary(a, c));

  REQUIRE(a.trials.size() == 4);
  for (int t = 0; t < 4; ++t) {
    const TrialReport& rep = a.trials[static_cast<size_t>(t)];
    CHECK(rep.trial == t);
    CHECK(rep.seed == mix_seed(9, static_cast<uint64_t>(t)));
    CHECK(rep.calibration.preprocess.has_value());
    CHECK(rep.calibration.m == 80);
  }

  TrialConfig other = cfg;
  other.master_seed = 10;
  CHECK_FALSE(same_summary(a, run_trials(pool, other)));
}

TEST_CASE("trial summary aggregates its own reports") {
  const Dataset pool = raw_pool(150);
  const TrialsSummary s = run_trials(pool, small_trials());
  double risk = 0.0, mrr = 0.0, size = 0.0, conf = 0.0, cov = 0.0;
  for (const TrialReport& r : s.trials) {
    risk += r.test_risk;
    mrr += r.mrr_at_10;
    size += r.mean_pruned_size;
    conf += 1.0 - r.calibration.delta_effective;
    cov += r.constraint_satisfied ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(s.trials.size());
  CHECK(s.mean_test_risk == risk / n);
  CHECK(s.mean_mrr == mrr / n);
  CHECK(s.mean_size == size / n);
  CHECK(s.mean_confidence == conf / n);
  CHECK(s.coverage == cov / n);
  CHECK(s.speedup == 10.0 / s.mean_size);
}

TEST_CASE("trial configuration is validated") {
  const Dataset pool = raw_pool(50);
  TrialConfig cfg = small_trials();
  cfg.calib_size = 30;
  cfg.test_size = 30;  // 60 > 50 queries
  CHECK_THROWS_AS(run_trials(pool, cfg), Error);
  cfg.test_size = 20;
  cfg.n_trials = 0;
  CHECK_THROWS_AS(run_trials(pool, cfg), Error);
  cfg.n_trials = 1;
  cfg.workers = 0;
  CHECK_THROWS_AS(run_trials(pool, cfg), Error);
  cfg.workers = 1;
  cfg.calib_size = 0;
  CHECK_THROWS_AS(run_trials(pool, cfg), Error);
  Dataset empty;
  CHECK_THROWS_AS(run_trials(empty, small_trials()), Error);
}

TEST_CASE("threshold baseline tunes on the exact sweep") {
  Dataset calib;
  calib.meta.pool_size = 1;
  calib.meta.calibrated = true;
  calib.meta.fused = true;
  for (int i = 0; i < 40; ++i) {
    calib.records.push_back(single("hi" + std::to_string(i), 0.9, true));
  }
  for (int i = 0; i < 10; ++i) {
    calib.records.push_back(single("lo" + std::to_string(i), 0.3, true));
  }
  // At threshold 0.9 MRR is 0.8; retaining the low scorers lifts it to 1.
  auto t = est_calibrate(calib, 0.8);
  REQUIRE(t.has_value());
  CHECK(t->tau == 0.9);
  t = est_calibrate(calib, 0.81);
  REQUIRE(t.has_value());
  CHECK(t->tau == 0.3);
  t = est_calibrate(calib, 1.0);
  REQUIRE(t.has_value());
  CHECK(t->tau == 0.3);

  for (int i = 0; i < 5; ++i) {
    calib.records.push_back(single("ng" + std::to_string(i), 0.9, false));
  }
  calib.meta.queries_no_gold = 5;
  CHECK_FALSE(est_calibrate(calib, 0.95).has_value());
  CHECK_THROWS_AS(est_calibrate(calib, 1.5), Error);
}

TEST_CASE("rank-cutoff baseline finds the smallest sufficient depth") {
  Dataset calib;
  calib.meta.pool_size = 2;
  calib.meta.calibrated = true;
  calib.meta.fused = true;
  for (int i = 0; i < 20; ++i) {
    QueryRecord rec;  // gold leads
    rec.query_id = "a" + std::to_string(i);
    rec.candidates = {cand("g", 0.9, 0.9), cand("x", 0.5, 0.5)};
    rec.gold_ids = {"g"};
    calib.records.push_back(rec);
  }
  for (int i = 0; i < 20; ++i) {
    QueryRecord rec;  // gold trails at rank 2
    rec.query_id = "b" + std::to_string(i);
    rec.candidates = {cand("x", 0.9, 0.9), cand("g", 0.5, 0.5)};
    rec.gold_ids = {"g"};
    calib.records.push_back(rec);
  }
  // Depth 1 scores 0.5; depth 2 scores (20 + 20/2)/40 = 0.75.
  auto r = ert_calibrate(calib, 0.5);
  REQUIRE(r.has_value());
  CHECK(*r == 1);
  r = ert_calibrate(calib, 0.6);
  REQUIRE(r.has_value());
  CHECK(*r == 2);
  CHECK_FALSE(ert_calibrate(calib, 0.76).has_value());
}

TEST_CASE("baseline trials share splits with the certified runs") {
  const Dataset pool = raw_pool(150);
  const TrialConfig cfg = small_trials();
  const TrialsSummary certified = run_trials(pool, cfg);
  const BaselineSummary est = run_baseline_trials(pool, cfg, BaselineKind::est, 0.7);
  const BaselineSummary ert = run_baseline_trials(pool, cfg, BaselineKind::ert, 0.7);

  REQUIRE(est.trials.size() == certified.trials.size());
  CHECK(est.kind == BaselineKind::est);
  CHECK(est.required_mrr == 0.7);
  for (size_t t = 0; t < est.trials.size(); ++t) {
    CHECK(est.trials[t].seed == certified.trials[t].seed);
    CHECK(ert.trials[t].seed == certified.trials[t].seed);
    CHECK(est.trials[t].mean_pruned_size >= 0.0);
    CHECK(est.trials[t].mean_pruned_size <= 10.0);
    if (ert.trials[t].achievable) {
      CHECK(ert.trials[t].tuned >= 1.0);
      CHECK(ert.trials[t].tuned <= 10.0);
    }
  }
  double cov = 0.0;
  for (const auto& t : est.trials) cov += t.constraint_satisfied ? 1.0 : 0.0;
  CHECK(est.coverage == cov / static_cast<double>(est.trials.size()));

  // An impossible target forces the full-set fallback.
  SynthConfig hard_cfg;
  hard_cfg.n_queries = 120;
  hard_cfg.pool_size = 10;
  hard_cfg.gap = 0.5;
  hard_cfg.reranker = RerankerMode::noisy;
  hard_cfg.reranker_noise = 2.0;
  hard_cfg.seed = 12;
  const Dataset hard = generate(hard_cfg);
  TrialConfig hcfg = small_trials();
  hcfg.calib_size = 70;
  hcfg.test_size = 50;
  const BaselineSummary fallback =
      run_baseline_trials(hard, hcfg, BaselineKind::est, 1.0);
  for (const auto& t : fallback.trials) {
    if (!t.achievable) {
      CHECK(t.tuned == 0.0);
      CHECK(t.mean_pruned_size == 10.0);
    }
  }
}

TEST_CASE("risk-level sweep shares trials with the plain runner") {
  const Dataset pool = raw_pool(150, 3.0, 21);
  TrialConfig cfg = small_trials();
  cfg.calibration.mode = CorrectionMode::both;

  const std::vector<TradeoffRow> rows = tradeoff(pool, {0.8, 0.3, 0.5}, cfg);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].alpha == 0.3);
  CHECK(rows[1].alpha == 0.5);
  CHECK(rows[2].alpha == 0.8);
  // Looser targets certify deeper pruning, never shallower.
  CHECK(rows[0].mean_size >= rows[1].mean_size);
  CHECK(rows[1].mean_size >= rows[2].mean_size);

  TrialConfig one = cfg;
  one.calibration.alpha = 0.5;
  const TrialsSummary direct = run_trials(pool, one);
  CHECK(rows[1].mean_mrr == direct.mean_mrr);
  CHECK(rows[1].mean_size == direct.mean_size);
  CHECK(rows[1].coverage == direct.coverage);

  CHECK_THROWS_AS(tradeoff(pool, {}, cfg), Error);
  CHECK_THROWS_AS(tradeoff(pool, {0.0}, cfg), Error);
  CHECK_THROWS_AS(tradeoff(pool, {1.2}, cfg), Error);
}

TEST_CASE("confidence sweep reports the budget the target costs") {
  const Dataset pool = raw_pool(150, 1.0, 22);
  TrialConfig cfg = small_trials();
  const std::vector<ConfidenceSweepRow> rows =
      confidence_sweep(pool, {0.2, 0.5, 0.35}, cfg);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].alpha == 0.5);
  CHECK(rows[1].alpha == 0.35);
  CHECK(rows[2].alpha == 0.2);
  for (const auto& row : rows) {
    CHECK(row.corrected_confidence >= 0.0);
    CHECK(row.corrected_confidence <= 1.0);
    CHECK(row.coverage >= 0.0);
    CHECK(row.coverage <= 1.0);
  }
  // Tighter targets can only cost confidence budget, never restore it.
  CHECK(rows[0].corrected_confidence >= rows[2].corrected_confidence);

  TrialConfig one = cfg;
  one.calibration.alpha = 0.35;
  one.calibration.mode = CorrectionMode::confidence;
  const TrialsSummary direct = run_trials(pool, one);
  CHECK(rows[1].corrected_confidence == direct.mean_confidence);
  CHECK(rows[1].coverage == direct.coverage);
}
