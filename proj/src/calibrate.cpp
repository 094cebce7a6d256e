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

#include "riskprune/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <ostream>
#include <thread>
#include <utility>

#include "riskprune/error.hpp"
#include "riskprune/rng.hpp"
#include "riskprune/snapshot.hpp"

namespace riskprune {
namespace {

// Advances per-query segment pointers down a non-increasing threshold
// sequence; one pass over all curves costs O(total breakpoints) in pointer
// movement plus O(m) per stop.
class CurveWalker {
 public:
  explicit CurveWalker(const LossCurveSet& set)
      : curves_(&set.curves), seg_(set.curves.size(), -1) {}

  void advance(double tau, std::vector<double>& losses, int64_t& size_sum) {
    const auto& cs = *curves_;
    size_sum = 0;
    for (size_t q = 0; q < cs.size(); ++q) {
      const LossCurve& c = cs[q];
      ptrdiff_t s = seg_[q];
      const ptrdiff_t n = static_cast<ptrdiff_t>(c.taus.size());
      while (s + 1 < n && c.taus[s + 1] >= tau) ++s;
      seg_[q] = s;
      if (s >= 0) {
        losses[q] = c.losses[s];
        size_sum += c.counts[s];
      } else {
        losses[q] = 1.0;  // empty retained set
      }
    }
  }

 private:
  const std::vector<LossCurve>* curves_;
  std::vector<ptrdiff_t> seg_;
};

// Compensated accumulator for the long incremental sweep.
struct Neumaier {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};

std::vector<double> breakpoint_union(const LossCurveSet& set) {
  size_t total = 2;
  for (const auto& c : set.curves) total += c.taus.size();
  std::vector<double> taus;
  taus.reserve(total);
  taus.push_back(1.0);
  for (const auto& c : set.curves) {
    taus.insert(taus.end(), c.taus.begin(), c.taus.end());
  }
  taus.push_back(0.0);
  std::sort(taus.begin(), taus.end(), std::greater<double>());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  return taus;
}

std::vector<size_t> make_order(size_t m, const std::optional<uint64_t>& seed) {
  std::vector<size_t> order(m);
  for (size_t i = 0; i < m; ++i) order[i] = i;
  if (seed) {
    Rng rng(*seed);
    rng.shuffle(order);
  }
  return order;
}

void validate_risk_inputs(const LossCurveSet& set, double delta) {
  if (set.curves.empty()) throw_domain("calibration set is empty");
  if (!(delta > 0.0 && delta <= 1.0)) throw_invalid("delta must lie in (0, 1]");
}

// Bound on one loss vector, floored at its own dataset-order mean like every
// grid point of build_risk_curve.
double bounded_risk(std::span<const double> dataset_order,
                    std::span<const double> bound_order, double delta,
                    WsrVariant variant, bool hoeffding) {
  double s = 0.0;
  for (const double l : dataset_order) s += l;
  const double emp = s / static_cast<double>(dataset_order.size());
  double b;
  if (hoeffding) {
    b = hoeffding_ucb(dataset_order, delta);
  } else {
    WsrBound bound(delta, variant);
    b = bound.ucb(bound_order);
  }
  return std::max(b, emp);
}

}  // namespace

std::vector<double> make_grid(double step) {
  if (!(step > 0.0 && step <= 0.5)) {
    throw_invalid("grid step must lie in (0, 0.5]");
  }
  const int64_t n = std::llround(1.0 / step);
  std::vector<double> grid(n + 1);
  for (int64_t i = 0; i <= n; ++i) {
    grid[i] = static_cast<double>(n - i) / static_cast<double>(n);
  }
  return grid;
}

LossCurveSet build_loss_curves(const Dataset& dataset, const MetricSpec& metric) {
  if (dataset.records.empty()) throw_domain("calibration set is empty");
  LossCurveSet set;
  set.metric = metric;
  set.curves.reserve(dataset.records.size());
  for (const auto& rec : dataset.records) {
    set.curves.push_back(make_loss_curve(rec, metric));
  }
  return set;
}

RiskCurve build_risk_curve(const LossCurveSet& set, const RiskCurveOptions& opts) {
  validate_risk_inputs(set, opts.delta);
  if (opts.grid_step < 0.0) throw_invalid("grid step must be non-negative");
  if (opts.workers < 1) throw_invalid("worker count must be positive");

  RiskCurve curve;
  curve.thresholds =
      opts.grid_step > 0.0 ? make_grid(opts.grid_step) : breakpoint_union(set);
  curve.delta = opts.delta;
  curve.m = set.m();

  const size_t g_count = curve.thresholds.size();
  const size_t m = set.m();
  curve.empirical_risk.resize(g_count);
  curve.ucb.resize(g_count);
  curve.mean_size.resize(g_count);

  const std::vector<size_t> order = make_order(m, opts.shuffle_seed);
  const bool shuffled = opts.shuffle_seed.has_value();

  auto run_range = [&](size_t lo, size_t hi) {
    CurveWalker walker(set);
    std::vector<double> buf(m), wsr_buf(shuffled ? m : 0);
    WsrBound bound(opts.delta, opts.wsr);
    for (size_t g = lo; g < hi; ++g) {
      int64_t size_sum = 0;
      walker.advance(curve.thresholds[g], buf, size_sum);
      double s = 0.0;
      for (const double l : buf) s += l;
      const double emp = s / static_cast<double>(m);
      double b;
      if (opts.hoeffding) {
        b = hoeffding_ucb(buf, opts.delta);
      } else if (shuffled) {
        for (size_t i = 0; i < m; ++i) wsr_buf[i] = buf[order[i]];
        b = bound.ucb(wsr_buf);
      } else {
        b = bound.ucb(buf);
      }
      curve.empirical_risk[g] = emp;
      curve.ucb[g] = std::max(b, emp);
      curve.mean_size[g] = static_cast<double>(size_sum) / static_cast<double>(m);
    }
  };

  const size_t workers =
      std::min<size_t>(std::max(opts.workers, 1), std::max<size_t>(g_count, 1));
  if (workers <= 1) {
    run_range(0, g_count);
    return curve;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  const size_t chunk = (g_count + workers - 1) / workers;
  for (size_t w = 0; w < workers; ++w) {
    const size_t lo = w * chunk;
    const size_t hi = std::min(g_count, lo + chunk);
    threads.emplace_back([&, w, lo, hi] {
      try {
        if (lo < hi) run_range(lo, hi);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return curve;
}

RiskSweep exact_risk_sweep(const LossCurveSet& set) {
  if (set.curves.empty()) throw_domain("calibration set is empty");
  const size_t m = set.m();

  struct Event {
    double tau;
    int32_t query;
    int32_t seg;
  };
  size_t total = 0;
  for (const auto& c : set.curves) total += c.taus.size();
  std::vector<Event> events;
  events.reserve(total);
  for (size_t q = 0; q < m; ++q) {
    const auto& c = set.curves[q];
    for (size_t s = 0; s < c.taus.size(); ++s) {
      events.push_back(Event{c.taus[s], static_cast<int32_t>(q),
                             static_cast<int32_t>(s)});
    }
  }
  std::sort(events.begin(), events.end(),
            [](const Event& a, const Event& b) { return a.tau > b.tau; });

  RiskSweep sweep;
  sweep.thresholds.reserve(total + 2);
  sweep.thresholds.push_back(1.0);
  for (const auto& e : events) sweep.thresholds.push_back(e.tau);
  sweep.thresholds.push_back(0.0);
  sweep.thresholds.erase(
      std::unique(sweep.thresholds.begin(), sweep.thresholds.end()),
      sweep.thresholds.end());

  sweep.empirical_risk.resize(sweep.thresholds.size());
  sweep.mean_size.resize(sweep.thresholds.size());

  // Everything starts on the empty segment: loss 1 per query, size 0.
  std::vector<double> cur_loss(m, 1.0);
  Neumaier loss_sum;
  loss_sum.sum = static_cast<double>(m);
  int64_t size_sum = 0;
  std::vector<int32_t> cur_count(m, 0);

  size_t ev = 0;
  const double md = static_cast<double>(m);
  for (size_t g = 0; g < sweep.thresholds.size(); ++g) {
    const double tau = sweep.thresholds[g];
    while (ev < events.size() && events[ev].tau >= tau) {
      const Event& e = events[ev++];
      const auto& c = set.curves[e.query];
      loss_sum.add(c.losses[e.seg] - cur_loss[e.query]);
      cur_loss[e.query] = c.losses[e.seg];
      size_sum += c.counts[e.seg] - cur_count[e.query];
      cur_count[e.query] = c.counts[e.seg];
    }
    sweep.empirical_risk[g] =
        std::clamp(loss_sum.value() / md, 0.0, 1.0);
    sweep.mean_size[g] = static_cast<double>(size_sum) / md;
  }
  return sweep;
}

std::optional<size_t> select_threshold_index(const RiskCurve& curve, double alpha) {
  if (curve.thresholds.empty()) throw_invalid("risk curve is empty");
  std::optional<size_t> best;
  for (size_t j = curve.thresholds.size(); j-- > 0;) {
    if (curve.ucb[j] < alpha) {
      best = j;
    } else {
      break;
    }
  }
  return best;
}

std::optional<Threshold> select_threshold(const RiskCurve& curve, double alpha) {
  const auto idx = select_threshold_index(curve, alpha);
  if (!idx) return std::nullopt;
  return Threshold{curve.thresholds[*idx]};
}

RiskCorrection correct_risk(const RiskCurve& curve, double alpha) {
  if (curve.thresholds.empty()) throw_invalid("risk curve is empty");
  if (curve.ucb.back() < alpha) {
    throw_invalid("risk correction applies only when no threshold is certifiable");
  }
  RiskCorrection out;
  out.alpha_c = *std::min_element(curve.ucb.begin(), curve.ucb.end());
  for (size_t j = curve.thresholds.size(); j-- > 0;) {
    if (curve.ucb[j] <= out.alpha_c + 1e-12) {
      out.index = j;
      out.threshold = Threshold{curve.thresholds[j]};
      break;
    }
  }
  return out;
}

ConfidenceCorrection correct_confidence(const LossCurveSet& set,
                                        const RiskCurve& base, double alpha,
                                        const RiskCurveOptions& opts) {
  validate_risk_inputs(set, opts.delta);
  if (base.ucb.empty()) throw_invalid("risk curve is empty");
  if (base.ucb.back() < alpha) {
    throw_invalid("confidence correction applies only when no threshold is certifiable");
  }

  const size_t m = set.m();
  std::vector<double> buf(m);
  {
    CurveWalker walker(set);
    int64_t size_sum = 0;
    walker.advance(base.thresholds.back(), buf, size_sum);
  }
  const std::vector<size_t> order = make_order(m, opts.shuffle_seed);
  std::vector<double> bound_buf;
  if (opts.shuffle_seed) {
    bound_buf.resize(m);
    for (size_t i = 0; i < m; ++i) bound_buf[i] = buf[order[i]];
  }
  const std::span<const double> bound_view =
      opts.shuffle_seed ? std::span<const double>(bound_buf)
                        : std::span<const double>(buf);

  for (int64_t k = 1;; ++k) {
    double delta_c = opts.delta + 0.01 * static_cast<double>(k);
    const bool last = delta_c >= 1.0;
    if (last) delta_c = 1.0;
    const double b = bounded_risk(buf, bound_view, delta_c, opts.wsr, opts.hoeffding);
    if (b < alpha) {
      RiskCurveOptions at_c = opts;
      at_c.delta = delta_c;
      ConfidenceCorrection out;
      out.delta_c = delta_c;
      out.achieved = true;
      out.curve = build_risk_curve(set, at_c);
      const auto idx = select_threshold_index(out.curve, alpha);
      // The last grid point reproduces b bit for bit, so selection succeeds.
      out.index = idx.value();
      out.threshold = Threshold{out.curve.thresholds[out.index]};
      return out;
    }
    if (last) break;
  }

  // Not even a vacuous budget certifies alpha: alpha sits at or below the
  // empirical floor. Report zero confidence at the best-risk threshold.
  const RiskCorrection rc = correct_risk(base, alpha);
  ConfidenceCorrection out;
  out.delta_c = 1.0;
  out.achieved = false;
  out.index = rc.index;
  out.threshold = rc.threshold;
  out.curve = base;
  return out;
}

CalibrationResult finish_calibration(const LossCurveSet& curves,
                                     const RiskCurve& curve,
                                     const CalibrateOptions& opts,
                                     int64_t queries_no_gold,
                                     RiskCurve* out_curve) {
  if (!(opts.alpha >= 0.0 && opts.alpha <= 1.0)) {
    throw_invalid("alpha must lie in [0, 1]");
  }
  if (!(opts.delta > 0.0 && opts.delta <= 1.0)) {
    throw_invalid("delta must lie in (0, 1]");
  }
  if (opts.mode == CorrectionMode::none) {
    throw_invalid("correction mode must be risk, confidence, or both");
  }

  RiskCurveOptions rc_opts;
  rc_opts.delta = opts.delta;
  rc_opts.grid_step = opts.grid_step;
  rc_opts.wsr = opts.wsr;
  rc_opts.hoeffding = opts.hoeffding;
  rc_opts.shuffle_seed = opts.shuffle_seed;
  rc_opts.workers = opts.workers;

  CalibrationResult r;
  r.alpha_requested = opts.alpha;
  r.delta_requested = opts.delta;
  r.m = curves.m();
  r.queries_no_gold = queries_no_gold;
  size_t violated = 0;
  for (const auto& c : curves.curves) violated += c.monotone_violated ? 1 : 0;
  r.monotone_violation_fraction =
      static_cast<double>(violated) / static_cast<double>(curves.m());
  r.metric = opts.metric.name();
  r.grid_step = opts.grid_step;
  r.grid_points = curve.thresholds.size();
  r.wsr_variant = opts.hoeffding
                      ? "hoeffding"
                      : (opts.wsr == WsrVariant::predictable ? "predictable"
                                                             : "printed");
  r.wsr_shuffle_seed = opts.shuffle_seed;

  RiskCurve corrected_curve;
  const RiskCurve* final_curve = &curve;
  size_t idx = 0;

  const auto sel = select_threshold_index(curve, opts.alpha);
  if (sel) {
    idx = *sel;
    r.achievable = true;
    r.correction = CorrectionMode::none;
    r.alpha_effective = opts.alpha;
    r.delta_effective = opts.delta;
  } else {
    r.achievable = false;
    switch (opts.mode) {
      case CorrectionMode::risk: {
        const RiskCorrection rc = correct_risk(curve, opts.alpha);
        idx = rc.index;
        r.correction = CorrectionMode::risk;
        r.alpha_effective = rc.alpha_c;
        r.delta_effective = opts.delta;
        break;
      }
      case CorrectionMode::confidence: {
        ConfidenceCorrection cc =
            correct_confidence(curves, curve, opts.alpha, rc_opts);
        idx = cc.index;
        r.correction = CorrectionMode::confidence;
        r.alpha_effective = opts.alpha;
        r.delta_effective = cc.delta_c;
        corrected_curve = std::move(cc.curve);
        final_curve = &corrected_curve;
        break;
      }
      case CorrectionMode::both: {
        const RiskCorrection rc = correct_risk(curve, opts.alpha);
        ConfidenceCorrection cc =
            correct_confidence(curves, curve, opts.alpha, rc_opts);
        idx = rc.index;
        r.correction = CorrectionMode::both;
        r.alpha_effective = rc.alpha_c;
        r.delta_effective = opts.delta;
        r.delta_corrected = cc.delta_c;
        r.threshold_at_delta_corrected = cc.threshold.tau;
        break;
      }
      case CorrectionMode::none:
        break;  // rejected above
    }
  }

  r.threshold = Threshold{final_curve->thresholds[idx]};
  r.empirical_risk_at_threshold = final_curve->empirical_risk[idx];
  r.ucb_at_threshold = final_curve->ucb[idx];
  r.mean_size_at_threshold = final_curve->mean_size[idx];

  if (opts.shuffle_seed && !opts.hoeffding) {
    // Order sensitivity: the same loss vector in dataset order.
    std::vector<double> losses(curves.m());
    for (size_t q = 0; q < curves.m(); ++q) {
      losses[q] = curves.curves[q].at(r.threshold.tau);
    }
    WsrBound bound(final_curve->delta, opts.wsr);
    r.ucb_dataset_order =
        std::max(bound.ucb(losses), r.empirical_risk_at_threshold);
  }

  if (out_curve) {
    *out_curve = final_curve == &curve ? curve : std::move(corrected_curve);
  }
  return r;
}

CalibrationResult calibrate(const Dataset& calib, const CalibrateOptions& opts,
                            RiskCurve* out_curve) {
  const LossCurveSet curves = build_loss_curves(calib, opts.metric);
  RiskCurveOptions rc_opts;
  rc_opts.delta = opts.delta;
  rc_opts.grid_step = opts.grid_step;
  rc_opts.wsr = opts.wsr;
  rc_opts.hoeffding = opts.hoeffding;
  rc_opts.shuffle_seed = opts.shuffle_seed;
  rc_opts.workers = opts.workers;
  const RiskCurve curve = build_risk_curve(curves, rc_opts);
  return finish_calibration(curves, curve, opts, calib.meta.queries_no_gold,
                            out_curve);
}

void write_curve_csv(const RiskCurve& curve, std::ostream& out) {
  out << "threshold,empirical_risk,ucb,mean_size\n";
  for (size_t i = 0; i < curve.thresholds.size(); ++i) {
    out << format_double(curve.thresholds[i]) << ','
        << format_double(curve.empirical_risk[i]) << ','
        << format_double(curve.ucb[i]) << ','
        << format_double(curve.mean_size[i]) << '\n';
  }
  if (!out) throw_io("curve export failed");
}

void write_sweep_csv(const RiskSweep& sweep, std::ostream& out) {
  out << "threshold,empirical_risk,mean_size\n";
  for (size_t i = 0; i < sweep.thresholds.size(); ++i) {
    out << format_double(sweep.thresholds[i]) << ','
        << format_double(sweep.empirical_risk[i]) << ','
        << format_double(sweep.mean_size[i]) << '\n';
  }
  if (!out) throw_io("sweep export failed");
}

}  // namespace riskprune
