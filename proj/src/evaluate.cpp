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

#include "riskprune/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>
#include <utility>

#include "riskprune/error.hpp"
#include "riskprune/metrics.hpp"
#include "riskprune/rng.hpp"

namespace riskprune {
namespace {

RiskCurveOptions risk_options(const CalibrateOptions& c) {
  RiskCurveOptions o;
  o.delta = c.delta;
  o.grid_step = c.grid_step;
  o.wsr = c.wsr;
  o.hoeffding = c.hoeffding;
  o.shuffle_seed = c.shuffle_seed;
  o.workers = c.workers;
  return o;
}

void validate_trial_config(const Dataset& pool, const TrialConfig& cfg) {
  if (pool.records.empty()) throw_domain("pool dataset has no queries");
  if (cfg.n_trials < 1) throw_invalid("n_trials must be >= 1");
  if (cfg.calib_size == 0 || cfg.test_size == 0)
    throw_invalid("calib_size and test_size must both be positive");
  if (cfg.calib_size + cfg.test_size > pool.records.size())
    throw_invalid("calib_size + test_size exceeds the pool (" +
                  std::to_string(cfg.calib_size) + " + " +
                  std::to_string(cfg.test_size) + " > " +
                  std::to_string(pool.records.size()) + " queries)");
  if (cfg.workers < 1) throw_invalid("workers must be >= 1");
}

Dataset subset(const Dataset& pool, const size_t* idx, size_t n) {
  Dataset out;
  out.meta = pool.meta;
  out.meta.missing_reranker = 0;
  out.meta.queries_no_gold = 0;
  out.records.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    out.records.push_back(pool.records[idx[i]]);
    const QueryRecord& rec = out.records.back();
    if (!rec.gold_in_pool()) ++out.meta.queries_no_gold;
    for (const Candidate& c : rec.candidates)
      if (!c.has_reranker()) ++out.meta.missing_reranker;
  }
  return out;
}

// One trial's split plus the preprocessing fitted on its calibration half.
// The shuffle depends only on (master_seed, trial), so every runner that
// shares a master seed sees identical splits, trial for trial.
struct SplitContext {
  int trial = 0;
  uint64_t seed = 0;
  Dataset calib;
  Dataset test;
  Preprocess prep;
};

SplitContext make_split(const Dataset& pool, const TrialConfig& cfg, int trial) {
  SplitContext ctx;
  ctx.trial = trial;
  ctx.seed = mix_seed(cfg.master_seed, static_cast<uint64_t>(trial));
  std::vector<size_t> idx(pool.records.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  Rng rng(ctx.seed);
  rng.shuffle(idx);
  ctx.calib = subset(pool, idx.data(), cfg.calib_size);
  ctx.test = subset(pool, idx.data() + cfg.calib_size, cfg.test_size);
  ctx.prep = fit_apply_preprocess(ctx.calib, cfg.prep);
  apply_preprocess(ctx.test, ctx.prep);
  return ctx;
}

// Strided trial loop. Each fn(t) writes only to its own result slot, so the
// output is identical for any worker count; the first failing worker's
// exception is rethrown.
template <typename Fn>
void for_each_trial(int n_trials, int workers, Fn&& fn) {
  const int w = std::max(1, std::min(workers, n_trials));
  if (w == 1) {
    for (int t = 0; t < n_trials; ++t) fn(t);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<size_t>(w));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(w));
  for (int wi = 0; wi < w; ++wi) {
    threads.emplace_back([&, wi] {
      try {
        for (int t = wi; t < n_trials; t += w) fn(t);
      } catch (...) {
        errors[static_cast<size_t>(wi)] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

int pool_width(const Dataset& pool) {
  if (pool.meta.pool_size > 0) return pool.meta.pool_size;
  size_t widest = 0;
  for (const QueryRecord& rec : pool.records)
    widest = std::max(widest, rec.candidates.size());
  return static_cast<int>(widest);
}

// Rank of the best gold document after reranking the retained span, or 0
// when none survives. Shared by the certified and baseline test paths.
int reranked_gold_rank(const QueryRecord& rec,
                       std::span<const Candidate> retained) {
  std::vector<Candidate> reranked = rerank(retained, rec.query_id);
  for (size_t i = 0; i < reranked.size(); ++i)
    if (rec.is_gold(reranked[i].doc_id)) return static_cast<int>(i + 1);
  return 0;
}

struct BaselineEval {
  double test_risk = 0.0;
  double mrr_at_10 = 0.0;
  double mrr_at_k = 0.0;  // at the target cutoff, for the constraint
  double mean_size = 0.0;
};

BaselineEval eval_threshold_baseline(const Dataset& test, Threshold t, int k) {
  const MetricSpec metric{MetricSpec::Kind::mrr, k};
  BaselineEval e;
  int64_t size_sum = 0;
  for (const QueryRecord& rec : test.records) {
    std::span<const Candidate> retained = prune(rec, t);
    size_sum += static_cast<int64_t>(retained.size());
    e.test_risk += pruned_loss(rec, t, metric);
    const int rank = reranked_gold_rank(rec, retained);
    if (rank >= 1 && rank <= 10) e.mrr_at_10 += 1.0 / rank;
    if (rank >= 1 && rank <= k) e.mrr_at_k += 1.0 / rank;
  }
  const double m = static_cast<double>(test.records.size());
  e.test_risk /= m;
  e.mrr_at_10 /= m;
  e.mrr_at_k /= m;
  e.mean_size = static_cast<double>(size_sum) / m;
  return e;
}

BaselineEval eval_rank_baseline(const Dataset& test, int64_t r, int k) {
  const MetricSpec metric{MetricSpec::Kind::mrr, k};
  BaselineEval e;
  int64_t size_sum = 0;
  for (const QueryRecord& rec : test.records) {
    const size_t keep = std::min<size_t>(static_cast<size_t>(r),
                                         rec.candidates.size());
    size_sum += static_cast<int64_t>(keep);
    // Indexing the prefix-loss table keeps this evaluation consistent with
    // the calibration sweep, tie handling included.
    e.test_risk += loss_by_prefix(rec, metric)[keep];
    std::span<const Candidate> retained{rec.candidates.data(), keep};
    const int rank = reranked_gold_rank(rec, retained);
    if (rank >= 1 && rank <= 10) e.mrr_at_10 += 1.0 / rank;
    if (rank >= 1 && rank <= k) e.mrr_at_k += 1.0 / rank;
  }
  const double m = static_cast<double>(test.records.size());
  e.test_risk /= m;
  e.mrr_at_10 /= m;
  e.mrr_at_k /= m;
  e.mean_size = static_cast<double>(size_sum) / m;
  return e;
}

}  // namespace

TrialReport evaluate_test(const Dataset& test, const CalibrationResult& result) {
  if (test.records.empty()) throw_domain("test dataset has no queries");
  const MetricSpec metric =
      result.metric.empty() ? MetricSpec{} : metric_from_string(result.metric);
  double loss_sum = 0.0;
  double rr_sum = 0.0;
  int64_t size_sum = 0;
  for (const QueryRecord& rec : test.records) {
    std::span<const Candidate> retained = prune(rec, result.threshold);
    size_sum += static_cast<int64_t>(retained.size());
    loss_sum += pruned_loss(rec, result.threshold, metric);
    const int rank = reranked_gold_rank(rec, retained);
    if (rank >= 1 && rank <= 10) rr_sum += 1.0 / rank;
  }
  const double m = static_cast<double>(test.records.size());
  TrialReport rep;
  rep.mrr_at_10 = rr_sum / m;
  rep.test_risk = loss_sum / m;
  rep.mean_pruned_size = static_cast<double>(size_sum) / m;
  rep.constraint_satisfied = rep.test_risk <= result.alpha_effective;
  rep.calibration = result;
  return rep;
}

TrialsSummary run_trials(const Dataset& pool, const TrialConfig& cfg) {
  validate_trial_config(pool, cfg);
  std::vector<TrialReport> reports(static_cast<size_t>(cfg.n_trials));
  for_each_trial(cfg.n_trials, cfg.workers, [&](int t) {
    SplitContext ctx = make_split(pool, cfg, t);
    LossCurveSet curves = build_loss_curves(ctx.calib, cfg.calibration.metric);
    RiskCurve base = build_risk_curve(curves, risk_options(cfg.calibration));
    CalibrationResult cres = finish_calibration(
        curves, base, cfg.calibration, ctx.calib.meta.queries_no_gold);
    cres.preprocess = ctx.prep;
    TrialReport rep = evaluate_test(ctx.test, cres);
    rep.trial = t;
    rep.seed = ctx.seed;
    reports[static_cast<size_t>(t)] = std::move(rep);
  });

  TrialsSummary s;
  s.n_trials = cfg.n_trials;
  for (const TrialReport& r : reports) {
    s.coverage += r.constraint_satisfied ? 1.0 : 0.0;
    s.mean_mrr += r.mrr_at_10;
    s.mean_size += r.mean_pruned_size;
    s.mean_test_risk += r.test_risk;
    s.mean_confidence += 1.0 - r.calibration.delta_effective;
  }
  const double n = static_cast<double>(cfg.n_trials);
  s.coverage /= n;
  s.mean_mrr /= n;
  s.mean_size /= n;
  s.mean_test_risk /= n;
  s.mean_confidence /= n;
  s.speedup = s.mean_size > 0.0
                  ? static_cast<double>(pool_width(pool)) / s.mean_size
                  : std::numeric_limits<double>::infinity();
  s.trials = std::move(reports);
  return s;
}

std::optional<Threshold> est_calibrate(const Dataset& calib, double required_mrr,
                                       int k) {
  if (!(required_mrr >= 0.0 && required_mrr <= 1.0))
    throw_invalid("required MRR must lie in [0, 1]");
  LossCurveSet curves =
      build_loss_curves(calib, MetricSpec{MetricSpec::Kind::mrr, k});
  RiskSweep sweep = exact_risk_sweep(curves);
  // Thresholds descend, so the first level meeting the target is the largest.
  for (size_t g = 0; g < sweep.thresholds.size(); ++g) {
    if (1.0 - sweep.empirical_risk[g] >= required_mrr)
      return Threshold{sweep.thresholds[g]};
  }
  return std::nullopt;
}

std::optional<int64_t> ert_calibrate(const Dataset& calib, double required_mrr,
                                     int k) {
  if (!(required_mrr >= 0.0 && required_mrr <= 1.0))
    throw_invalid("required MRR must lie in [0, 1]");
  if (calib.records.empty()) throw_domain("calibration dataset has no queries");
  const MetricSpec metric{MetricSpec::Kind::mrr, k};
  size_t max_n = 0;
  for (const QueryRecord& rec : calib.records)
    max_n = std::max(max_n, rec.candidates.size());
  if (max_n == 0) return std::nullopt;
  std::vector<double> mrr_sum(max_n + 1, 0.0);
  for (const QueryRecord& rec : calib.records) {
    const std::vector<double> lp = loss_by_prefix(rec, metric);
    const size_t n = rec.candidates.size();
    for (size_t r = 1; r <= max_n; ++r)
      mrr_sum[r] += 1.0 - lp[std::min(r, n)];
  }
  const double m = static_cast<double>(calib.records.size());
  for (size_t r = 1; r <= max_n; ++r) {
    if (mrr_sum[r] / m >= required_mrr) return static_cast<int64_t>(r);
  }
  return std::nullopt;
}

BaselineSummary run_baseline_trials(const Dataset& pool, const TrialConfig& cfg,
                                    BaselineKind kind, double required_mrr) {
  validate_trial_config(pool, cfg);
  if (!(required_mrr >= 0.0 && required_mrr <= 1.0))
    throw_invalid("required MRR must lie in [0, 1]");
  const int k = cfg.calibration.metric.kind == MetricSpec::Kind::mrr
                    ? cfg.calibration.metric.k
                    : 10;
  std::vector<BaselineTrial> rows(static_cast<size_t>(cfg.n_trials));
  for_each_trial(cfg.n_trials, cfg.workers, [&](int t) {
    SplitContext ctx = make_split(pool, cfg, t);
    BaselineTrial bt;
    bt.trial = t;
    bt.seed = ctx.seed;
    BaselineEval e;
    if (kind == BaselineKind::est) {
      std::optional<Threshold> tuned = est_calibrate(ctx.calib, required_mrr, k);
      bt.achievable = tuned.has_value();
      const Threshold use = tuned.value_or(Threshold{0.0});
      bt.tuned = use.tau;
      e = eval_threshold_baseline(ctx.test, use, k);
    } else {
      std::optional<int64_t> tuned = ert_calibrate(ctx.calib, required_mrr, k);
      bt.achievable = tuned.has_value();
      int64_t fallback = 1;
      for (const QueryRecord& rec : ctx.calib.records)
        fallback = std::max<int64_t>(
            fallback, static_cast<int64_t>(rec.candidates.size()));
      const int64_t use = tuned.value_or(fallback);
      bt.tuned = static_cast<double>(use);
      e = eval_rank_baseline(ctx.test, use, k);
    }
    bt.mrr_at_10 = e.mrr_at_10;
    bt.test_risk = e.test_risk;
    bt.mean_pruned_size = e.mean_size;
    bt.constraint_satisfied = e.mrr_at_k >= required_mrr;
    rows[static_cast<size_t>(t)] = bt;
  });

  BaselineSummary s;
  s.kind = kind;
  s.required_mrr = required_mrr;
  s.n_trials = cfg.n_trials;
  for (const BaselineTrial& r : rows) {
    s.coverage += r.constraint_satisfied ? 1.0 : 0.0;
    s.mean_mrr += r.mrr_at_10;
    s.mean_size += r.mean_pruned_size;
  }
  const double n = static_cast<double>(cfg.n_trials);
  s.coverage /= n;
  s.mean_mrr /= n;
  s.mean_size /= n;
  s.trials = std::move(rows);
  return s;
}

std::vector<TradeoffRow> tradeoff(const Dataset& pool,
                                  std::vector<double> alphas,
                                  const TrialConfig& cfg) {
  validate_trial_config(pool, cfg);
  if (alphas.empty()) throw_invalid("no risk levels given");
  for (double a : alphas)
    if (!(a > 0.0 && a <= 1.0))
      throw_invalid("every risk level must lie in (0, 1]");
  std::sort(alphas.begin(), alphas.end());
  const size_t na = alphas.size();

  struct Cell {
    bool satisfied = false;
    double mrr = 0.0;
    double size = 0.0;
  };
  std::vector<Cell> cells(static_cast<size_t>(cfg.n_trials) * na);
  for_each_trial(cfg.n_trials, cfg.workers, [&](int t) {
    SplitContext ctx = make_split(pool, cfg, t);
    LossCurveSet curves = build_loss_curves(ctx.calib, cfg.calibration.metric);
    RiskCurve base = build_risk_curve(curves, risk_options(cfg.calibration));
    for (size_t ai = 0; ai < na; ++ai) {
      CalibrateOptions opts = cfg.calibration;
      opts.alpha = alphas[ai];
      CalibrationResult cres = finish_calibration(
          curves, base, opts, ctx.calib.meta.queries_no_gold);
      TrialReport rep = evaluate_test(ctx.test, cres);
      cells[static_cast<size_t>(t) * na + ai] = {rep.constraint_satisfied,
                                                 rep.mrr_at_10,
                                                 rep.mean_pruned_size};
    }
  });

  std::vector<TradeoffRow> out(na);
  const double n = static_cast<double>(cfg.n_trials);
  for (size_t ai = 0; ai < na; ++ai) {
    TradeoffRow& row = out[ai];
    row.alpha = alphas[ai];
    for (int t = 0; t < cfg.n_trials; ++t) {
      const Cell& c = cells[static_cast<size_t>(t) * na + ai];
      row.coverage += c.satisfied ? 1.0 : 0.0;
      row.mean_mrr += c.mrr;
      row.mean_size += c.size;
    }
    row.coverage /= n;
    row.mean_mrr /= n;
    row.mean_size /= n;
  }
  return out;
}

std::vector<ConfidenceSweepRow> confidence_sweep(const Dataset& pool,
                                                 std::vector<double> alphas,
                                                 const TrialConfig& cfg) {
  validate_trial_config(pool, cfg);
  if (alphas.empty()) throw_invalid("no risk levels given");
  for (double a : alphas)
    if (!(a > 0.0 && a <= 1.0))
      throw_invalid("every risk level must lie in (0, 1]");
  std::sort(alphas.begin(), alphas.end(), std::greater<double>());
  const size_t na = alphas.size();

  struct Cell {
    bool satisfied = false;
    double confidence = 0.0;
  };
  std::vector<Cell> cells(static_cast<size_t>(cfg.n_trials) * na);
  for_each_trial(cfg.n_trials, cfg.workers, [&](int t) {
    SplitContext ctx = make_split(pool, cfg, t);
    LossCurveSet curves = build_loss_curves(ctx.calib, cfg.calibration.metric);
    RiskCurve base = build_risk_curve(curves, risk_options(cfg.calibration));
    for (size_t ai = 0; ai < na; ++ai) {
      CalibrateOptions opts = cfg.calibration;
      opts.alpha = alphas[ai];
      opts.mode = CorrectionMode::confidence;
      CalibrationResult cres = finish_calibration(
          curves, base, opts, ctx.calib.meta.queries_no_gold);
      TrialReport rep = evaluate_test(ctx.test, cres);
      cells[static_cast<size_t>(t) * na + ai] = {
          rep.constraint_satisfied, 1.0 - cres.delta_effective};
    }
  });

  std::vector<ConfidenceSweepRow> out(na);
  const double n = static_cast<double>(cfg.n_trials);
  for (size_t ai = 0; ai < na; ++ai) {
    ConfidenceSweepRow& row = out[ai];
    row.alpha = alphas[ai];
    for (int t = 0; t < cfg.n_trials; ++t) {
      const Cell& c = cells[static_cast<size_t>(t) * na + ai];
      row.coverage += c.satisfied ? 1.0 : 0.0;
      row.corrected_confidence += c.confidence;
    }
    row.coverage /= n;
    row.corrected_confidence /= n;
  }
  return out;
}

}  // namespace riskprune
