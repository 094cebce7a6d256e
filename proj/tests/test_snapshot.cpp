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
#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "riskprune/error.hpp"
#include "riskprune/rng.hpp"
#include "riskprune/snapshot.hpp"
#include "riskprune/types.hpp"

using namespace riskprune;

namespace {

ErrorCategory category_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.category();
  }
  FAIL("expected an error");
  return ErrorCategory::io;
}

Dataset awkward_dataset() {
  Dataset data;
  data.meta.pool_size = 4;
  data.meta.calibrated = true;
  data.meta.fused = true;
  data.meta.beta = 1.0 / 3.0;
  data.meta.source = "synthetic gap=2";
  Rng rng(5);
  const std::vector<double> awkward = {0.1,    1.0 / 3.0, 1e-300, 1e300,
                                       -0.875, 0.30000000000000004};
  for (int q = 0; q < 8; ++q) {
    QueryRecord rec;
    rec.query_id = "query-" + std::to_string(q);
    const int n = 1 + static_cast<int>(rng.next_below(4));
    for (int i = 0; i < n; ++i) {
      Candidate c;
      c.doc_id = "doc_" + std::to_string(i);
      c.retriever_score = awkward[rng.next_below(awkward.size())];
      c.calibrated_score = rng.next_u01();
      c.reranker_score =
          i == 0 ? kNegInf : awkward[rng.next_below(awkward.size())];
      c.fused_score = rng.next_u01();
      rec.candidates.push_back(c);
    }
    if (q % 3 != 0) rec.gold_ids = {"doc_0", "doc_9"};
    std::sort(rec.gold_ids.begin(), rec.gold_ids.end());
    sort_by_calibrated(rec);
    data.records.push_back(rec);
  }
  // One missing-reranker sentinel per query; queries 0, 3, 6 carry no gold.
  data.meta.missing_reranker = 8;
  data.meta.queries_no_gold = 3;
  return data;
}

bool same_double(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return a == b && std::signbit(a) == std::signbit(b);
}

std::string save_to_string(const Dataset& data) {
  std::ostringstream out;
  save_snapshot(data, out);
  return out.str();
}

Dataset load_from_string(const std::string& text) {
  std::istringstream in(text);
  return load_snapshot(in, "snap");
}

}  // namespace

TEST_CASE("shortest round-trip formatting restores every bit") {
  const std::vector<double> values = {
      0.0,     -0.0,    1.0,     0.1,          1.0 / 3.0,
      1e-300,  1e300,   -1e-10,  6.02214e23,   0.30000000000000004,
      2.0 / 3, 1e-323,  -5.5,    123456789.25, std::nextafter(1.0, 2.0)};
  for (double v : values) {
    const std::string s = format_double(v);
    // strtod instead of stod: stod throws on subnormals, strtod only flags
    // ERANGE and still returns the correctly rounded value.
    char* end = nullptr;
    const double r = std::strtod(s.c_str(), &end);
    CHECK(end == s.c_str() + s.size());
    CHECK(same_double(r, v));
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(kNegInf) == "-inf");
}

TEST_CASE("snapshot save then load reproduces the dataset bitwise") {
  const Dataset data = awkward_dataset();
  const Dataset back = load_from_string(save_to_string(data));

  CHECK(back.meta.pool_size == data.meta.pool_size);
  CHECK(back.meta.calibrated == data.meta.calibrated);
  CHECK(back.meta.fused == data.meta.fused);
  CHECK(same_double(back.meta.beta, data.meta.beta));
  CHECK(back.meta.source == data.meta.source);
  CHECK(back.meta.missing_reranker == data.meta.missing_reranker);
  CHECK(back.meta.queries_no_gold == data.meta.queries_no_gold);

  REQUIRE(back.records.size() == data.records.size());
  for (size_t i = 0; i < data.records.size(); ++i) {
    const QueryRecord& a = data.records[i];
    const QueryRecord& b = back.records[i];
    CHECK(a.query_id == b.query_id);
    CHECK(a.gold_ids == b.gold_ids);
    REQUIRE(a.candidates.size() == b.candidates.size());
    for (size_t j = 0; j < a.candidates.size(); ++j) {
      CHECK(a.candidates[j].doc_id == b.candidates[j].doc_id);
      CHECK(same_double(a.candidates[j].retriever_score,
                        b.candidates[j].retriever_score));
      CHECK(same_double(a.candidates[j].calibrated_score,
                        b.candidates[j].calibrated_score));
      CHECK(same_double(a.candidates[j].reranker_score,
                        b.candidates[j].reranker_score));
      CHECK(same_double(a.candidates[j].fused_score,
                        b.candidates[j].fused_score));
    }
  }

  // A second round trip is byte-identical.
  CHECK(save_to_string(back) == save_to_string(data));
}

TEST_CASE("raw snapshots mark absent scores and keep retriever order") {
  Dataset raw;
  raw.meta.pool_size = 2;
  QueryRecord rec;
  rec.query_id = "q";
  Candidate a, b;
  a.doc_id = "a";
  a.retriever_score = 1.0;
  b.doc_id = "b";
  b.retriever_score = 2.0;
  rec.candidates = {a, b};
  sort_by_retriever(rec);
  raw.records.push_back(rec);

  const std::string text = save_to_string(raw);
  CHECK(text.find(" - ") != std::string::npos);  // absent calibrated score
  const Dataset back = load_from_string(text);
  CHECK_FALSE(back.meta.calibrated);
  CHECK(back.records[0].candidates[0].doc_id == "b");
  CHECK_FALSE(back.records[0].candidates[0].has_calibrated());
  CHECK_FALSE(back.records[0].candidates[0].has_fused());
}

TEST_CASE("derived counters are recomputed on load") {
  Dataset data = awkward_dataset();
  data.meta.missing_reranker = 999;  // lies in the header are ignored
  const Dataset back = load_from_string(save_to_string(data));
  int64_t missing = 0, no_gold = 0;
  for (const auto& rec : data.records) {
    for (const auto& c : rec.candidates) {
      if (!c.has_reranker()) ++missing;
    }
    if (!rec.gold_in_pool()) ++no_gold;
  }
  CHECK(back.meta.missing_reranker == missing);
  CHECK(back.meta.queries_no_gold == no_gold);
}

TEST_CASE("malformed snapshots are rejected with line numbers") {
  auto load = [](const std::string& text) {
    return [text] { load_from_string(text); };
  };
  const std::string header =
      "riskprune.dataset.v1\tpool_size=4\tcalibrated=0\tfused=0\tbeta=-"
      "\tsource=x\n";

  CHECK(category_of(load("")) == ErrorCategory::parse);
  CHECK(category_of(load("wrong.magic\tpool_size=4\n")) ==
        ErrorCategory::parse);
  CHECK(category_of(load(
            "riskprune.dataset.v1\tpool_size=4\tcolor=red\n")) ==
        ErrorCategory::parse);
  CHECK(category_of(load("riskprune.dataset.v1\tcalibrated=1\n")) ==
        ErrorCategory::parse);  // pool_size missing
  CHECK(category_of(load(header + "q q1\n")) == ErrorCategory::parse);
  CHECK(category_of(load(header + "q q1\tg\tc d 1.0 - bad -\n")) ==
        ErrorCategory::parse);
  CHECK(category_of(load(header + "q q1\tg\tc d 1.0 - 0.5\n")) ==
        ErrorCategory::parse);  // five fields, not six

  // Too many candidates for the declared pool.
  std::string overfull = header;
  overfull += "q q1\tg";
  for (int i = 0; i < 5; ++i) {
    overfull += "\tc d" + std::to_string(i) + " 1.0 - 0.5 -";
  }
  overfull += "\n";
  CHECK(category_of(load(overfull)) == ErrorCategory::parse);

  // Calibrated header with a missing calibrated score.
  const std::string cal_header =
      "riskprune.dataset.v1\tpool_size=4\tcalibrated=1\tfused=0\tbeta=-"
      "\tsource=x\n";
  CHECK(category_of(load(cal_header + "q q1\tg\tc d 1.0 - 0.5 -\n")) ==
        ErrorCategory::parse);
  // Calibrated scores outside [0, 1] are rejected.
  CHECK(category_of(load(cal_header + "q q1\tg\tc d 1.0 1.5 0.5 -\n")) ==
        ErrorCategory::parse);

  // Duplicate query ids are rejected.
  const std::string dup = header +
                          "q q1\tg\tc a 1.0 - 0.5 -\n"
                          "q q1\tg\tc b 1.0 - 0.5 -\n";
  try {
    load_from_string(dup);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::parse);
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    CHECK(std::string(e.what()).find("duplicate query id") !=
          std::string::npos);
  }
}

TEST_CASE("file endpoints surface io errors") {
  CHECK(category_of([] { load_snapshot_file("/nonexistent/nope.snap"); }) ==
        ErrorCategory::io);
  const Dataset data = awkward_dataset();
  CHECK(category_of([&] {
          save_snapshot_file(data, "/nonexistent/dir/out.snap");
        }) == ErrorCategory::io);
}
