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
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "naive_oracle.hpp"
#include "riskprune/error.hpp"
#include "riskprune/rng.hpp"
#include "riskprune/types.hpp"

using namespace riskprune;

namespace {

Candidate cand(std::string id, double cal,
               double fused = std::numeric_limits<double>::quiet_NaN()) {
  Candidate c;
  c.doc_id = std::move(id);
  c.calibrated_score = cal;
  c.fused_score = fused;
  return c;
}

QueryRecord record(std::vector<Candidate> cands,
                   std::vector<std::string> gold) {
  QueryRecord rec;
  rec.query_id = "q";
  rec.candidates = std::move(cands);
  rec.gold_ids = std::move(gold);
  std::sort(rec.gold_ids.begin(), rec.gold_ids.end());
  return rec;
}

}  // namespace

TEST_CASE("candidate score presence helpers") {
  Candidate c;
  CHECK_FALSE(c.has_calibrated());
  CHECK_FALSE(c.has_fused());
  CHECK_FALSE(c.has_reranker());
  c.calibrated_score = 0.0;
  c.fused_score = 0.0;
  c.reranker_score = 0.0;
  CHECK(c.has_calibrated());
  CHECK(c.has_fused());
  CHECK(c.has_reranker());
  c.reranker_score = kNegInf;
  CHECK_FALSE(c.has_reranker());
}

TEST_CASE("gold membership uses the sorted id list") {
  QueryRecord rec = record({cand("a", 0.9), cand("b", 0.5)}, {"b", "zz"});
  CHECK(rec.is_gold("b"));
  CHECK(rec.is_gold("zz"));
  CHECK_FALSE(rec.is_gold("a"));
  CHECK_FALSE(rec.is_gold(""));
  CHECK(rec.gold_in_pool());

  QueryRecord none = record({cand("a", 0.9)}, {"zz"});
  CHECK_FALSE(none.gold_in_pool());
  QueryRecord empty = record({cand("a", 0.9)}, {});
  CHECK_FALSE(empty.gold_in_pool());
}

TEST_CASE("sort_by_calibrated orders descending with id tiebreak") {
  QueryRecord rec =
      record({cand("c", 0.5), cand("a", 0.5), cand("b", 0.9)}, {});
  sort_by_calibrated(rec);
  CHECK(rec.candidates[0].doc_id == "b");
  CHECK(rec.candidates[1].doc_id == "a");
  CHECK(rec.candidates[2].doc_id == "c");
}

TEST_CASE("sort_by_calibrated rejects missing scores") {
  QueryRecord rec = record(
      {cand("a", 0.5), cand("b", std::numeric_limits<double>::quiet_NaN())},
      {});
  CHECK_THROWS_AS(sort_by_calibrated(rec), Error);
  try {
    sort_by_calibrated(rec);
    FAIL("expected a domain error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::domain);
  }
}

TEST_CASE("prune returns the same set as a linear scan") {
  Rng rng(7);
  for (int iter = 0; iter < 50; ++iter) {
    const int n = 1 + static_cast<int>(rng.next_below(40));
    std::vector<Candidate> cands;
    for (int i = 0; i < n; ++i) {
      // Coarse scores force plenty of ties.
      const double score =
          static_cast<double>(rng.next_below(8)) / 8.0;
      cands.push_back(cand("d" + std::to_string(i), score));
    }
    QueryRecord rec = record(std::move(cands), {});
    sort_by_calibrated(rec);
    for (double tau : {0.0, 0.1, 0.125, 0.5, 0.625, 0.99, 1.0}) {
      const auto fast = prune(rec, Threshold{tau});
      const auto slow = oracle::naive_prune(rec, tau);
      REQUIRE(fast.size() == slow.size());
      for (size_t i = 0; i < slow.size(); ++i) {
        CHECK(fast[i].doc_id == slow[i].doc_id);
      }
    }
  }
}

TEST_CASE("prune edge thresholds") {
  QueryRecord rec = record({cand("a", 1.0), cand("b", 0.0)}, {});
  sort_by_calibrated(rec);
  CHECK(prune(rec, Threshold{0.0}).size() == 2);   // zero scores survive tau 0
  CHECK(prune(rec, Threshold{1.0}).size() == 1);
  QueryRecord low = record({cand("a", 0.3)}, {});
  sort_by_calibrated(low);
  CHECK(prune(low, Threshold{0.4}).empty());
}

TEST_CASE("rerank matches the reference sort and validates inputs") {
  Rng rng(11);
  for (int iter = 0; iter < 30; ++iter) {
    const int n = 1 + static_cast<int>(rng.next_below(20));
    std::vector<Candidate> cands;
    for (int i = 0; i < n; ++i) {
      const double fused = static_cast<double>(rng.next_below(5)) / 5.0;
      cands.push_back(cand("d" + std::to_string(i), 0.5, fused));
    }
    std::vector<Candidate> expect = cands;
    oracle::naive_rerank(expect);
    const std::vector<Candidate> got =
        rerank(std::span<const Candidate>(cands));
    REQUIRE(got.size() == expect.size());
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].doc_id == expect[i].doc_id);
    }
  }

  std::vector<Candidate> missing = {cand("a", 0.5, 0.2), cand("b", 0.5)};
  try {
    rerank(std::span<const Candidate>(missing), "q42");
    FAIL("expected a domain error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::domain);
    CHECK(std::string(e.what()).find("q42") != std::string::npos);
  }
}

TEST_CASE("correction mode names round-trip") {
  for (CorrectionMode m : {CorrectionMode::none, CorrectionMode::risk,
                           CorrectionMode::confidence, CorrectionMode::both}) {
    CHECK(correction_mode_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(correction_mode_from_string("bogus"), Error);
}

TEST_CASE("ordering comparators break ties by doc id") {
  Candidate a = cand("a", 0.5, 0.5);
  Candidate b = cand("b", 0.5, 0.5);
  CHECK(fused_before(a, b));
  CHECK_FALSE(fused_before(b, a));
  CHECK(calibrated_before(a, b));
  b.fused_score = 0.9;
  CHECK(fused_before(b, a));
}
