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

#include "riskprune/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "riskprune/error.hpp"
#include "riskprune/metrics.hpp"

namespace riskprune {
namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

int parse_int_field(const std::string& tok, std::string_view name,
                    std::string_view field, int64_t line_no) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw_parse(std::string(name) + ":" + std::to_string(line_no) + ": bad " +
                std::string(field) + " '" + tok + "'");
  }
  return value;
}

double parse_double_field(const std::string& tok, std::string_view name,
                          std::string_view field, int64_t line_no) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw_parse(std::string(name) + ":" + std::to_string(line_no) + ": bad " +
                std::string(field) + " '" + tok + "'");
  }
  return value;
}

// Stable logistic: 1 / (1 + exp(u)).
double sigmoid_neg(double u) {
  if (u >= 0.0) {
    const double e = std::exp(-u);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(u));
}

// log(1 + exp(u)) without overflow.
double log1pexp(double u) {
  if (u > 0.0) return u + std::log1p(std::exp(-u));
  return std::log1p(std::exp(u));
}

double platt_nll(std::span<const double> scores, std::span<const uint8_t> labels,
                 double a, double b) {
  double nll = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const double u = a * scores[i] + b;
    // p = P(y=1) = sigmoid(-u); -log p = log1pexp(u), -log(1-p) = log1pexp(-u)
    nll += labels[i] ? log1pexp(u) : log1pexp(-u);
  }
  return nll;
}

// Min-max calibration fallback. Clamped so held-out scores outside the
// fitted range still land in [0, 1].
void apply_minmax(Dataset& dataset, double lo, double hi) {
  const double width = hi - lo;
  for (auto& rec : dataset.records) {
    for (auto& c : rec.candidates) {
      c.calibrated_score =
          width > 0.0 ? std::clamp((c.retriever_score - lo) / width, 0.0, 1.0)
                      : 0.5;
    }
    sort_by_calibrated(rec);
  }
  dataset.meta.calibrated = true;
}

}  // namespace

std::vector<RunEntry> parse_run(std::istream& in, std::string_view name) {
  std::vector<std::vector<RunEntry>> groups;
  std::unordered_map<std::string, size_t> group_of;
  std::unordered_set<std::string> seen_pair;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 6) {
      throw_parse(std::string(name) + ":" + std::to_string(line_no) +
                  ": expected 6 fields, got " + std::to_string(tok.size()));
    }
    RunEntry e;
    e.query_id = tok[0];
    e.doc_id = tok[2];
    e.rank = parse_int_field(tok[3], name, "rank", line_no);
    e.score = parse_double_field(tok[4], name, "score", line_no);
    e.tag = tok[5];
    if (e.rank < 1) {
      throw_parse(std::string(name) + ":" + std::to_string(line_no) +
                  ": rank must be positive, got " + tok[3]);
    }
    if (!std::isfinite(e.score)) {
      throw_parse(std::string(name) + ":" + std::to_string(line_no) +
                  ": non-finite score '" + tok[4] + "'");
    }
    const std::string pair = e.query_id + '\x1f' + e.doc_id;
    if (!seen_pair.insert(pair).second) {
      throw_parse(std::string(name) + ":" + std::to_string(line_no) +
                  ": duplicate entry for query '" + e.query_id + "' doc '" +
                  e.doc_id + "'");
    }
    auto [it, fresh] = group_of.try_emplace(e.query_id, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(std::move(e));
  }
  if (in.bad()) throw_io(std::string(name) + ": read failed");

  std::vector<RunEntry> flat;
  for (auto& g : groups) {
    std::sort(g.begin(), g.end(), [](const RunEntry& x, const RunEntry& y) {
      return x.rank < y.rank;
    });
    for (size_t i = 1; i < g.size(); ++i) {
      if (g[i].rank == g[i - 1].rank) {
        throw_parse(std::string(name) + ": duplicate rank " +
                    std::to_string(g[i].rank) + " in query '" +
                    g[i].query_id + "'");
      }
    }
    flat.insert(flat.end(), std::make_move_iterator(g.begin()),
                std::make_move_iterator(g.end()));
  }
  return flat;
}

std::vector<RunEntry> parse_run_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open run file '" + path + "'");
  return parse_run(in, path);
}

Qrels parse_qrels(std::istream& in, std::string_view name) {
  Qrels q;
  std::unordered_set<std::string> seen_pair;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 4) {
      throw_parse(std::string(name) + ":" + std::to_string(line_no) +
                  ": expected 4 fields, got " + std::to_string(tok.size()));
    }
    const std::string& qid = tok[0];
    const std::string& docid = tok[2];
    const int rel = parse_int_field(tok[3], name, "relevance", line_no);
    const std::string pair = qid + '\x1f' + docid;
    if (!seen_pair.insert(pair).second) {
      throw_parse(std::string(name) + ":" + std::to_string(line_no) +
                  ": duplicate judgment for query '" + qid + "' doc '" +
                  docid + "'");
    }
    ++q.judged;
    if (rel >= 1) q.gold[qid].push_back(docid);
  }
  if (in.bad()) throw_io(std::string(name) + ": read failed");
  for (auto& [qid, ids] : q.gold) std::sort(ids.begin(), ids.end());
  return q;
}

Qrels parse_qrels_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open qrels file '" + path + "'");
  return parse_qrels(in, path);
}

Dataset build_dataset(const std::vector<RunEntry>& retriever_run,
                      const std::vector<RunEntry>& reranker_run,
                      const Qrels& qrels, int pool_size) {
  if (pool_size < 1) throw_invalid("pool size must be at least 1");

  std::unordered_set<std::string> retriever_pairs;
  retriever_pairs.reserve(retriever_run.size() * 2);
  for (const auto& e : retriever_run) {
    retriever_pairs.insert(e.query_id + '\x1f' + e.doc_id);
  }
  std::unordered_map<std::string, double> reranker_score;
  reranker_score.reserve(reranker_run.size() * 2);
  for (const auto& e : reranker_run) {
    std::string pair = e.query_id + '\x1f' + e.doc_id;
    if (!retriever_pairs.count(pair)) {
      throw_domain("reranker scored query '" + e.query_id + "' doc '" +
                   e.doc_id + "' which the retriever run does not contain");
    }
    reranker_score.emplace(std::move(pair), e.score);
  }

  Dataset out;
  out.meta.pool_size = pool_size;
  static const std::vector<std::string> kNoGold;
  size_t i = 0;
  while (i < retriever_run.size()) {
    const std::string& qid = retriever_run[i].query_id;
    size_t j = i;
    while (j < retriever_run.size() && retriever_run[j].query_id == qid) ++j;

    QueryRecord rec;
    rec.query_id = qid;
    const size_t take = std::min<size_t>(pool_size, j - i);
    rec.candidates.reserve(take);
    for (size_t t = i; t < i + take; ++t) {
      Candidate c;
      c.doc_id = retriever_run[t].doc_id;
      c.retriever_score = retriever_run[t].score;
      const auto it = reranker_score.find(qid + '\x1f' + c.doc_id);
      if (it != reranker_score.end()) {
        c.reranker_score = it->second;
      } else {
        ++out.meta.missing_reranker;
      }
      rec.candidates.push_back(std::move(c));
    }
    const auto git = qrels.gold.find(qid);
    rec.gold_ids = git != qrels.gold.end() ? git->second : kNoGold;
    sort_by_retriever(rec);
    if (!rec.gold_in_pool()) ++out.meta.queries_no_gold;
    out.records.push_back(std::move(rec));
    i = j;
  }
  out.meta.source = "runs";
  return out;
}

double PlattModel::apply(double s) const { return sigmoid_neg(a * s + b); }

PlattModel fit_platt(std::span<const double> scores,
                     std::span<const uint8_t> labels) {
  if (scores.empty() || scores.size() != labels.size()) {
    throw_invalid("calibration fit needs equally many scores and labels");
  }
  const size_t m = scores.size();
  size_t pos = 0;
  for (size_t i = 0; i < m; ++i) {
    if (!std::isfinite(scores[i])) throw_domain("non-finite score in calibration fit");
    pos += labels[i] ? 1 : 0;
  }
  if (pos == 0 || pos == m) {
    throw_domain(std::string("labels are all ") + (pos == 0 ? "negative" : "positive") +
                 "; probability calibration is undefined, skip it");
  }

  const double p_rate = static_cast<double>(pos) / static_cast<double>(m);
  const double intercept_only = std::log((1.0 - p_rate) / p_rate);

  bool constant = true;
  for (size_t i = 1; i < m && constant; ++i) constant = scores[i] == scores[0];
  if (constant) return PlattModel{0.0, intercept_only};

  PlattModel model{0.0, intercept_only};
  double nll = platt_nll(scores, labels, model.a, model.b);
  for (int iter = 0; iter < 100; ++iter) {
    double ga = 0.0, gb = 0.0, haa = 0.0, hab = 0.0, hbb = 0.0;
    for (size_t i = 0; i < m; ++i) {
      const double u = model.a * scores[i] + model.b;
      const double p = sigmoid_neg(u);
      const double r = (labels[i] ? 1.0 : 0.0) - p;
      const double w = p * (1.0 - p);
      ga += r * scores[i];
      gb += r;
      haa += w * scores[i] * scores[i];
      hab += w * scores[i];
      hbb += w;
    }
    haa += 1e-12;
    hbb += 1e-12;
    const double det = haa * hbb - hab * hab;
    if (det <= 0.0 || !std::isfinite(det)) break;
    // Newton step: solve H * d = -grad.
    double da = -(hbb * ga - hab * gb) / det;
    double db = -(haa * gb - hab * ga) / det;
    double step = 1.0;
    double next_a = model.a, next_b = model.b, next_nll = nll;
    bool improved = false;
    for (int halve = 0; halve < 50; ++halve) {
      const double ta = model.a + step * da;
      const double tb = model.b + step * db;
      const double tn = platt_nll(scores, labels, ta, tb);
      if (tn <= nll) {
        next_a = ta;
        next_b = tb;
        next_nll = tn;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
    const double delta = std::abs(next_a - model.a) + std::abs(next_b - model.b);
    model.a = next_a;
    model.b = next_b;
    nll = next_nll;
    if (delta < 1e-8) break;
  }
  return model;
}

void apply_platt(Dataset& dataset, const PlattModel& model) {
  for (auto& rec : dataset.records) {
    for (auto& c : rec.candidates) {
      c.calibrated_score = model.apply(c.retriever_score);
    }
    sort_by_calibrated(rec);
  }
  dataset.meta.calibrated = true;
}

void fuse(Dataset& dataset, double beta, double rr_min, double rr_max) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw_invalid("fusion weight must lie in [0, 1]");
  }
  const double width = rr_max - rr_min;
  for (auto& rec : dataset.records) {
    for (auto& c : rec.candidates) {
      if (std::isnan(c.calibrated_score)) {
        throw_domain("fusion requires calibrated scores (query '" +
                     rec.query_id + "')");
      }
      if (beta == 1.0) {
        c.fused_score = c.calibrated_score;
        continue;
      }
      if (!c.has_reranker()) {
        c.fused_score = kNegInf;
        continue;
      }
      const double nr = width > 0.0 ? (c.reranker_score - rr_min) / width : 0.5;
      c.fused_score = beta * c.calibrated_score + (1.0 - beta) * nr;
    }
  }
  dataset.meta.fused = true;
  dataset.meta.beta = beta;
}

BetaSearchResult search_beta(const Dataset& dataset, double rr_min,
                             double rr_max, double step, int k) {
  if (!(step > 0.0 && step <= 1.0)) throw_invalid("beta grid step must lie in (0, 1]");
  if (k < 1) throw_invalid("mrr cutoff must be at least 1");
  const int n_steps = static_cast<int>(std::round(1.0 / step));
  const double width = rr_max - rr_min;

  std::vector<double> betas(n_steps + 1);
  for (int i = 0; i <= n_steps; ++i) betas[i] = i == n_steps ? 1.0 : i * step;
  std::vector<double> mrr_sum(betas.size(), 0.0);

  std::vector<double> cal, nr;
  std::vector<size_t> gold_idx;
  for (const auto& rec : dataset.records) {
    gold_idx.clear();
    const size_t n = rec.candidates.size();
    cal.resize(n);
    nr.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const Candidate& c = rec.candidates[i];
      if (std::isnan(c.calibrated_score)) {
        throw_domain("fusion weight search requires calibrated scores (query '" +
                     rec.query_id + "')");
      }
      cal[i] = c.calibrated_score;
      nr[i] = c.has_reranker()
                  ? (width > 0.0 ? (c.reranker_score - rr_min) / width : 0.5)
                  : kNegInf;
      if (rec.is_gold(c.doc_id)) gold_idx.push_back(i);
    }
    if (gold_idx.empty()) continue;

    for (size_t bi = 0; bi < betas.size(); ++bi) {
      const double beta = betas[bi];
      auto fused_at = [&](size_t i) {
        if (beta == 1.0) return cal[i];
        if (nr[i] == kNegInf) return kNegInf;
        return beta * cal[i] + (1.0 - beta) * nr[i];
      };
      // Best gold under (fused desc, doc_id asc).
      size_t best = gold_idx[0];
      double best_f = fused_at(best);
      for (size_t gi = 1; gi < gold_idx.size(); ++gi) {
        const size_t g = gold_idx[gi];
        const double f = fused_at(g);
        if (f > best_f || (f == best_f && rec.candidates[g].doc_id <
                                              rec.candidates[best].doc_id)) {
          best = g;
          best_f = f;
        }
      }
      int64_t ahead = 0;
      for (size_t i = 0; i < n; ++i) {
        if (i == best) continue;
        const double f = fused_at(i);
        if (f > best_f ||
            (f == best_f && rec.candidates[i].doc_id < rec.candidates[best].doc_id)) {
          ++ahead;
        }
      }
      const int64_t rank = ahead + 1;
      if (rank <= k) mrr_sum[bi] += 1.0 / static_cast<double>(rank);
    }
  }

  BetaSearchResult out;
  size_t best_bi = 0;
  for (size_t bi = 1; bi < betas.size(); ++bi) {
    if (mrr_sum[bi] > mrr_sum[best_bi]) best_bi = bi;
  }
  out.beta = betas[best_bi];
  out.mrr = dataset.records.empty()
                ? 0.0
                : mrr_sum[best_bi] / static_cast<double>(dataset.records.size());
  return out;
}

Preprocess fit_apply_preprocess(Dataset& calib, const PrepOptions& opts) {
  Preprocess prep;

  std::vector<double> scores;
  std::vector<uint8_t> labels;
  for (const auto& rec : calib.records) {
    for (const auto& c : rec.candidates) {
      scores.push_back(c.retriever_score);
      labels.push_back(rec.is_gold(c.doc_id) ? 1 : 0);
    }
  }
  if (scores.empty()) throw_domain("cannot fit preprocessing on an empty dataset");

  bool platt_ok = true;
  PlattModel model;
  try {
    model = fit_platt(scores, labels);
  } catch (const Error& e) {
    if (e.category() != ErrorCategory::domain) throw;
    platt_ok = false;
  }
  if (platt_ok) {
    prep.platt = true;
    prep.platt_a = model.a;
    prep.platt_b = model.b;
    apply_platt(calib, model);
  } else {
    // One-class labels: min-max normalize retriever scores instead, which
    // keeps the candidate order and stays in [0, 1].
    const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
    prep.platt = false;
    prep.retriever_min = *mn;
    prep.retriever_max = *mx;
    apply_minmax(calib, *mn, *mx);
  }

  double rr_min = 0.0, rr_max = 0.0;
  bool any = false;
  for (const auto& rec : calib.records) {
    for (const auto& c : rec.candidates) {
      if (!c.has_reranker()) continue;
      if (!any) {
        rr_min = rr_max = c.reranker_score;
        any = true;
      } else {
        rr_min = std::min(rr_min, c.reranker_score);
        rr_max = std::max(rr_max, c.reranker_score);
      }
    }
  }
  prep.reranker_min = rr_min;
  prep.reranker_max = rr_max;

  if (opts.fixed_beta) {
    if (!(*opts.fixed_beta >= 0.0 && *opts.fixed_beta <= 1.0)) {
      throw_invalid("fusion weight must lie in [0, 1]");
    }
    prep.beta = *opts.fixed_beta;
    fuse(calib, prep.beta, rr_min, rr_max);
    prep.beta_mrr = mrr_at_k(calib, opts.mrr_k);
  } else {
    const auto found = search_beta(calib, rr_min, rr_max, opts.beta_step, opts.mrr_k);
    prep.beta = found.beta;
    prep.beta_mrr = found.mrr;
    fuse(calib, prep.beta, rr_min, rr_max);
  }
  return prep;
}

void apply_preprocess(Dataset& dataset, const Preprocess& prep) {
  if (prep.platt) {
    apply_platt(dataset, PlattModel{prep.platt_a, prep.platt_b});
  } else {
    apply_minmax(dataset, prep.retriever_min, prep.retriever_max);
  }
  fuse(dataset, prep.beta, prep.reranker_min, prep.reranker_max);
}

}  // namespace riskprune
