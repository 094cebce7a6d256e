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

#include "riskprune/snapshot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_set>
#include <vector>

#include "riskprune/error.hpp"

namespace riskprune {
namespace {

constexpr std::string_view kMagic = "riskprune.dataset.v1";

double parse_double_tok(std::string_view tok, std::string_view name,
                        int64_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw_parse(std::string(name) + ":" + std::to_string(line_no) +
                ": bad number '" + std::string(tok) + "'");
  }
  return v;
}

int64_t parse_int_tok(std::string_view tok, std::string_view name,
                      int64_t line_no) {
  int64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw_parse(std::string(name) + ":" + std::to_string(line_no) +
                ": bad integer '" + std::string(tok) + "'");
  }
  return v;
}

std::vector<std::string_view> split_char(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_spaces(std::string_view s) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

void write_score(std::ostream& out, double v, bool present) {
  if (!present) {
    out << '-';
  } else {
    out << format_double(v);
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

void save_snapshot(const Dataset& dataset, std::ostream& out) {
  out << kMagic << "\tpool_size=" << dataset.meta.pool_size
      << "\tcalibrated=" << (dataset.meta.calibrated ? 1 : 0)
      << "\tfused=" << (dataset.meta.fused ? 1 : 0) << "\tbeta=";
  if (dataset.meta.fused) {
    out << format_double(dataset.meta.beta);
  } else {
    out << '-';
  }
  std::string source = dataset.meta.source;
  std::replace(source.begin(), source.end(), '\t', ' ');
  std::replace(source.begin(), source.end(), '\n', ' ');
  out << "\tsource=" << source << '\n';

  for (const auto& rec : dataset.records) {
    out << "q " << rec.query_id << "\tg";
    for (const auto& g : rec.gold_ids) out << ' ' << g;
    for (const auto& c : rec.candidates) {
      out << "\tc " << c.doc_id << ' ' << format_double(c.retriever_score) << ' ';
      write_score(out, c.calibrated_score, c.has_calibrated());
      out << ' ' << format_double(c.reranker_score) << ' ';
      write_score(out, c.fused_score, c.has_fused());
    }
    out << '\n';
  }
  if (!out) throw_io("snapshot write failed");
}

void save_snapshot_file(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw_io("cannot open '" + path + "' for writing");
  save_snapshot(dataset, out);
  out.flush();
  if (!out) throw_io("cannot write '" + path + "'");
}

Dataset load_snapshot(std::istream& in, std::string_view name) {
  std::string line;
  int64_t line_no = 0;
  if (!std::getline(in, line)) {
    throw_parse(std::string(name) + ": empty snapshot");
  }
  ++line_no;

  const auto header = split_char(line, '\t');
  if (header.empty() || header[0] != kMagic) {
    throw_parse(std::string(name) + ":1: not a " + std::string(kMagic) +
                " snapshot");
  }
  Dataset out;
  bool have_pool = false;
  for (size_t i = 1; i < header.size(); ++i) {
    const auto eq = header[i].find('=');
    if (eq == std::string_view::npos) {
      throw_parse(std::string(name) + ":1: bad header field '" +
                  std::string(header[i]) + "'");
    }
    const auto key = header[i].substr(0, eq);
    const auto val = header[i].substr(eq + 1);
    if (key == "pool_size") {
      out.meta.pool_size = static_cast<int>(parse_int_tok(val, name, 1));
      have_pool = true;
    } else if (key == "calibrated") {
      out.meta.calibrated = parse_int_tok(val, name, 1) != 0;
    } else if (key == "fused") {
      out.meta.fused = parse_int_tok(val, name, 1) != 0;
    } else if (key == "beta") {
      if (val != "-") out.meta.beta = parse_double_tok(val, name, 1);
    } else if (key == "source") {
      out.meta.source = std::string(val);
    } else {
      throw_parse(std::string(name) + ":1: unknown header key '" +
                  std::string(key) + "'");
    }
  }
  if (!have_pool || out.meta.pool_size < 1) {
    throw_parse(std::string(name) + ":1: missing or bad pool_size");
  }

  std::unordered_set<std::string> seen_qids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto blocks = split_char(line, '\t');
    if (blocks.size() < 2) {
      throw_parse(std::string(name) + ":" + std::to_string(line_no) +
                  ": expected query and gold blocks");
    }
    QueryRecord rec;
    {
      const auto tok = split_spaces(blocks[0]);
      if (tok.size() != 2 || tok[0] != "q") {
        throw_parse(std::string(name) + ":" + std::to_string(line_no) +
                    ": bad query block");
      }
      rec.query_id = std::string(tok[1]);
      if (!seen_qids.insert(rec.query_id).second) {
        throw_parse(std::string(name) + ":" + std::to_string(line_no) +
                    ": duplicate query id '" + rec.query_id + "'");
      }
    }
    {
      const auto tok = split_spaces(blocks[1]);
      if (tok.empty() || tok[0] != "g") {
        throw_parse(std::string(name) + ":" + std::to_string(line_no) +
                    ": bad gold block");
      }
      for (size_t i = 1; i < tok.size(); ++i) rec.gold_ids.emplace_back(tok[i]);
      std::sort(rec.gold_ids.begin(), rec.gold_ids.end());
      rec.gold_ids.erase(std::unique(rec.gold_ids.begin(), rec.gold_ids.end()),
                         rec.gold_ids.end());
    }
    for (size_t b = 2; b < blocks.size(); ++b) {
      const auto tok = split_spaces(blocks[b]);
      if (tok.size() != 6 || tok[0] != "c") {
        throw_parse(std::string(name) + ":" + std::to_string(line_no) +
                    ": bad candidate block");
      }
      Candidate c;
      c.doc_id = std::string(tok[1]);
      c.retriever_score = parse_double_tok(tok[2], name, line_no);
      c.calibrated_score = tok[3] == "-"
                               ? std::numeric_limits<double>::quiet_NaN()
                               : parse_double_tok(tok[3], name, line_no);
      c.reranker_score = parse_double_tok(tok[4], name, line_no);
      c.fused_score = tok[5] == "-" ? std::numeric_limits<double>::quiet_NaN()
                                    : parse_double_tok(tok[5], name, line_no);
      if (c.has_calibrated() &&
          !(c.calibrated_score >= 0.0 && c.calibrated_score <= 1.0)) {
        throw_parse(std::string(name) + ":" + std::to_string(line_no) +
                    ": calibrated score outside [0, 1]");
      }
      rec.candidates.push_back(std::move(c));
    }
    if (rec.candidates.size() > static_cast<size_t>(out.meta.pool_size)) {
      throw_parse(std::string(name) + ":" + std::to_string(line_no) +
                  ": more candidates than pool_size");
    }
    if (out.meta.calibrated) {
      for (const auto& c : rec.candidates) {
        if (!c.has_calibrated()) {
          throw_parse(std::string(name) + ":" + std::to_string(line_no) +
                      ": header says calibrated but doc '" + c.doc_id +
                      "' has no calibrated score");
        }
      }
      sort_by_calibrated(rec);
    } else {
      sort_by_retriever(rec);
    }
    out.records.push_back(std::move(rec));
  }
  if (in.bad()) throw_io(std::string(name) + ": read failed");

  // Recompute derived counters rather than trusting the header.
  out.meta.missing_reranker = 0;
  out.meta.queries_no_gold = 0;
  for (const auto& rec : out.records) {
    for (const auto& c : rec.candidates) {
      if (!c.has_reranker()) ++out.meta.missing_reranker;
    }
    if (!rec.gold_in_pool()) ++out.meta.queries_no_gold;
  }
  return out;
}

Dataset load_snapshot_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open snapshot '" + path + "'");
  return load_snapshot(in, path);
}

}  // namespace riskprune
