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

#include "riskprune/types.hpp"

#include <algorithm>

#include "riskprune/error.hpp"

namespace riskprune {

bool QueryRecord::is_gold(std::string_view doc_id) const {
  return std::binary_search(gold_ids.begin(), gold_ids.end(), doc_id);
}

bool QueryRecord::gold_in_pool() const {
  for (const Candidate& c : candidates) {
    if (is_gold(c.doc_id)) return true;
  }
  return false;
}

void sort_by_calibrated(QueryRecord& record) {
  for (const Candidate& c : record.candidates) {
    if (!c.has_calibrated())
      throw_domain("candidate " + c.doc_id + " in query " + record.query_id +
                   " has no calibrated score");
  }
  std::sort(record.candidates.begin(), record.candidates.end(),
            calibrated_before);
}

void sort_by_retriever(QueryRecord& record) {
  std::sort(record.candidates.begin(), record.candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.retriever_score != b.retriever_score)
                return a.retriever_score > b.retriever_score;
              return a.doc_id < b.doc_id;
            });
}

std::span<const Candidate> prune(const QueryRecord& record, Threshold t) {
  // Candidates are sorted by calibrated score descending, so the retained
  // set is the prefix before the first score below tau.
  auto it = std::partition_point(
      record.candidates.begin(), record.candidates.end(),
      [&](const Candidate& c) { return c.calibrated_score >= t.tau; });
  return {record.candidates.data(),
          static_cast<size_t>(it - record.candidates.begin())};
}

std::vector<Candidate> rerank(std::span<const Candidate> retained,
                              std::string_view query_id) {
  for (const Candidate& c : retained) {
    if (!c.has_fused())
      throw_domain("candidate " + c.doc_id + " in query " +
                   std::string(query_id.empty() ? "?" : query_id) +
                   " has no fused score; run fusion before reranking");
  }
  std::vector<Candidate> out(retained.begin(), retained.end());
  std::sort(out.begin(), out.end(), fused_before);
  return out;
}

const char* to_string(CorrectionMode mode) {
  switch (mode) {
    case CorrectionMode::none: return "none";
    case CorrectionMode::risk: return "risk";
    case CorrectionMode::confidence: return "confidence";
    case CorrectionMode::both: return "both";
  }
  return "none";
}

CorrectionMode correction_mode_from_string(std::string_view s) {
  if (s == "none") return CorrectionMode::none;
  if (s == "risk") return CorrectionMode::risk;
  if (s == "confidence") return CorrectionMode::confidence;
  if (s == "both") return CorrectionMode::both;
  throw_invalid("unknown correction mode: " + std::string(s));
}

}  // namespace riskprune
