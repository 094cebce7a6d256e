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

#include "riskprune/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "riskprune/error.hpp"
#include "riskprune/rng.hpp"

namespace riskprune {
namespace {

// Stream tag separating true_risk draws from generate draws.
constexpr uint64_t kTrueRiskTag = 0x7472756572697368ull;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::string query_name(int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "q%08lld", static_cast<long long>(i));
  return buf;
}

std::string doc_name(int j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "d%06d", j);
  return buf;
}

int gold_count(const SynthConfig& cfg, Rng& rng) {
  if (cfg.n_gold_max > cfg.n_gold) {
    return cfg.n_gold + static_cast<int>(rng.next_below(
                            static_cast<uint64_t>(cfg.n_gold_max - cfg.n_gold) + 1));
  }
  return cfg.n_gold;
}

void draw_scores(const SynthConfig& cfg, Rng& rng, int n_gold_q,
                 std::vector<double>& raw) {
  const int n = cfg.pool_size;
  raw.resize(n);
  if (!cfg.embedding) {
    for (int j = 0; j < n; ++j) {
      const double mu = j < n_gold_q ? cfg.gap : 0.0;
      raw[j] = mu + cfg.noise * rng.next_normal();
    }
    return;
  }

  const int d = cfg.embedding_dim;
  std::vector<double> qvec(d), w(d);
  double norm = 0.0;
  for (int t = 0; t < d; ++t) {
    qvec[t] = rng.next_normal();
    norm += qvec[t] * qvec[t];
  }
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (auto& v : qvec) v /= norm;
  } else {
    qvec[0] = 1.0;
  }
  for (int j = 0; j < n; ++j) {
    const double c = j < n_gold_q ? cfg.gap : 0.0;
    double wnorm = 0.0;
    for (int t = 0; t < d; ++t) {
      w[t] = c * qvec[t] + cfg.noise * rng.next_normal();
      wnorm += w[t] * w[t];
    }
    wnorm = std::sqrt(wnorm);
    double dot = 0.0;
    if (wnorm > 0.0) {
      for (int t = 0; t < d; ++t) dot += qvec[t] * (w[t] / wnorm);
    } else {
      dot = 1.0;  // degenerate zero vector collapses onto the query
    }
    raw[j] = std::clamp(dot, -1.0, 1.0);
  }
}

void draw_reranker(const SynthConfig& cfg, Rng& rng, int n_gold_q,
                   const std::vector<double>& raw, std::vector<double>& rr) {
  const int n = cfg.pool_size;
  rr.resize(n);
  switch (cfg.reranker) {
    case RerankerMode::consistent:
      rr = raw;
      return;
    case RerankerMode::noisy:
      for (int j = 0; j < n; ++j) {
        rr[j] = raw[j] + cfg.reranker_noise * rng.next_normal();
      }
      return;
    case RerankerMode::adversarial: {
      rr = raw;
      if (n_gold_q >= n) return;  // no distractor to plant
      int plant = n_gold_q;
      for (int j = n_gold_q + 1; j < n; ++j) {
        if (raw[j] < raw[plant]) plant = j;
      }
      rr[plant] = *std::max_element(rr.begin(), rr.end()) + 1.0;
      return;
    }
  }
}

QueryRecord make_record(const SynthConfig& cfg, int64_t qindex, uint64_t qseed) {
  Rng rng(qseed);
  const int n_gold_q = gold_count(cfg, rng);
  std::vector<double> raw, rr;
  draw_scores(cfg, rng, n_gold_q, raw);
  draw_reranker(cfg, rng, n_gold_q, raw, rr);

  QueryRecord rec;
  rec.query_id = query_name(qindex);
  rec.candidates.reserve(cfg.pool_size);
  for (int j = 0; j < cfg.pool_size; ++j) {
    Candidate c;
    c.doc_id = doc_name(j);
    c.retriever_score = raw[j];
    c.reranker_score = rr[j];
    rec.candidates.push_back(std::move(c));
    if (j < n_gold_q) rec.gold_ids.push_back(doc_name(j));
  }
  sort_by_retriever(rec);
  return rec;
}

// True posterior P(gold | raw score) for the score model, and the matching
// monotone map for reranker scores used by the canonical fusion.
struct CanonicalMaps {
  double a = 0.0;  // probability = 1 / (1 + exp(a * s + b))
  double b = 0.0;
  double rr_slope = 1.0;  // strictly positive so the fused order is never degenerate
  bool step = false;      // zero-noise degenerate model
  bool embedding = false;
  double gap = 0.0;

  double calibrated(double s) const {
    if (embedding) return std::clamp((s + 1.0) / 2.0, 0.0, 1.0);
    if (step) {
      if (s > gap / 2.0) return 1.0;
      if (s < gap / 2.0) return 0.0;
      return 0.5;
    }
    return sigmoid(-(a * s + b));
  }

  double reranker(double s) const {
    if (embedding) return std::clamp((s + 1.0) / 2.0, 0.0, 1.0);
    if (step) {
      if (s > gap / 2.0) return 1.0;
      if (s < gap / 2.0) return 0.0;
      return 0.5;
    }
    return sigmoid(rr_slope * (s - gap / 2.0));
  }
};

CanonicalMaps canonical_maps(const SynthConfig& cfg) {
  CanonicalMaps maps;
  maps.embedding = cfg.embedding;
  maps.gap = cfg.gap;
  if (cfg.embedding) return maps;
  if (cfg.noise == 0.0) {
    maps.step = true;
    return maps;
  }
  const double mean_gold =
      cfg.n_gold_max > cfg.n_gold ? (cfg.n_gold + cfg.n_gold_max) / 2.0 : cfg.n_gold;
  const double pi = mean_gold / cfg.pool_size;
  const double v = cfg.noise * cfg.noise;
  // Equal-variance Gaussian conditionals: log odds are linear in the score.
  maps.a = -cfg.gap / v;
  maps.b = cfg.gap * cfg.gap / (2.0 * v) + std::log((1.0 - pi) / pi);
  maps.rr_slope = cfg.gap != 0.0 ? std::abs(cfg.gap) / v : 1.0 / cfg.noise;
  return maps;
}

void apply_canonical_record(QueryRecord& rec, const CanonicalMaps& maps,
                            double beta) {
  for (auto& c : rec.candidates) {
    c.calibrated_score = maps.calibrated(c.retriever_score);
    const double nr = maps.reranker(c.reranker_score);
    c.fused_score = beta * c.calibrated_score + (1.0 - beta) * nr;
  }
  sort_by_calibrated(rec);
}

}  // namespace

void SynthConfig::validate() const {
  if (n_queries < 1) throw_invalid("n_queries must be positive");
  if (pool_size < 1) throw_invalid("pool_size must be positive");
  if (n_gold < 1) throw_invalid("n_gold must be positive");
  if (n_gold_max != 0 && n_gold_max < n_gold) {
    throw_invalid("n_gold_max must be 0 or at least n_gold");
  }
  if (std::max(n_gold, n_gold_max) > pool_size) {
    throw_invalid("gold count cannot exceed pool_size");
  }
  if (!(noise >= 0.0)) throw_invalid("noise must be non-negative");
  if (!(reranker_noise >= 0.0)) throw_invalid("reranker_noise must be non-negative");
  if (!std::isfinite(gap)) throw_invalid("gap must be finite");
  if (embedding && embedding_dim < 1) throw_invalid("embedding_dim must be positive");
}

RerankerMode reranker_mode_from_string(const std::string& s) {
  if (s == "consistent") return RerankerMode::consistent;
  if (s == "noisy") return RerankerMode::noisy;
  if (s == "adversarial") return RerankerMode::adversarial;
  throw_invalid("unknown reranker mode '" + s +
                "' (expected consistent, noisy, or adversarial)");
}

std::string to_string(RerankerMode mode) {
  switch (mode) {
    case RerankerMode::consistent: return "consistent";
    case RerankerMode::noisy: return "noisy";
    case RerankerMode::adversarial: return "adversarial";
  }
  return "consistent";
}

Dataset generate(const SynthConfig& cfg) {
  cfg.validate();
  Dataset out;
  out.records.reserve(cfg.n_queries);
  for (int64_t q = 0; q < cfg.n_queries; ++q) {
    out.records.push_back(make_record(cfg, q, mix_seed(cfg.seed, q)));
  }
  out.meta.pool_size = cfg.pool_size;
  out.meta.source = "synth seed=" + std::to_string(cfg.seed) +
                    " mode=" + to_string(cfg.reranker) +
                    (cfg.embedding ? " embedding" : "");
  return out;
}

void apply_canonical(Dataset& dataset, const SynthConfig& cfg, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw_invalid("fusion weight must lie in [0, 1]");
  const CanonicalMaps maps = canonical_maps(cfg);
  for (auto& rec : dataset.records) apply_canonical_record(rec, maps, beta);
  dataset.meta.calibrated = true;
  dataset.meta.fused = true;
  dataset.meta.beta = beta;
}

TrueRisk true_risk(const SynthConfig& cfg, Threshold tau, int64_t n_monte_carlo,
                   const MetricSpec& metric, double beta) {
  cfg.validate();
  if (n_monte_carlo < 1) throw_invalid("n_monte_carlo must be positive");
  if (!(beta >= 0.0 && beta <= 1.0)) throw_invalid("fusion weight must lie in [0, 1]");

  const CanonicalMaps maps = canonical_maps(cfg);
  const uint64_t stream = splitmix64(cfg.seed ^ kTrueRiskTag);
  double sum = 0.0, sumsq = 0.0;
  for (int64_t i = 0; i < n_monte_carlo; ++i) {
    QueryRecord rec = make_record(cfg, i, mix_seed(stream, i));
    apply_canonical_record(rec, maps, beta);
    const double loss = pruned_loss(rec, tau, metric);
    sum += loss;
    sumsq += loss * loss;
  }
  TrueRisk out;
  const double n = static_cast<double>(n_monte_carlo);
  out.estimate = sum / n;
  if (n_monte_carlo > 1) {
    const double var = std::max(0.0, (sumsq - n * out.estimate * out.estimate) /
                                         (n - 1.0));
    out.standard_error = std::sqrt(var / n);
  }
  return out;
}

}  // namespace riskprune
