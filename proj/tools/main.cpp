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

// riskprune command line. All computation goes through the C API in
// riskprune.h; this file only parses flags, builds the JSON option strings,
// and moves bytes between files and the library.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "riskprune.h"

namespace {

using json = nlohmann::ordered_json;

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitParse = 4;
constexpr int kExitDomain = 5;
constexpr int kExitInternal = 6;

struct DatasetHandle {
  rp_dataset* d = nullptr;
  ~DatasetHandle() { rp_dataset_free(d); }
};

struct StringHandle {
  char* s = nullptr;
  ~StringHandle() { rp_string_free(s); }
  std::string str() const { return s == nullptr ? std::string() : s; }
};

int exit_code_of(rp_status s) {
  switch (s) {
    case RP_OK:
      return 0;
    case RP_ERR_IO:
      return kExitIo;
    case RP_ERR_PARSE:
      return kExitParse;
    case RP_ERR_DOMAIN:
      return kExitDomain;
    case RP_ERR_INVALID_ARGUMENT:
      return kExitUsage;
    case RP_ERR_INTERNAL:
      return kExitInternal;
  }
  return kExitInternal;
}

const char* category_of(int exit_code) {
  switch (exit_code) {
    case kExitUsage:
      return "usage";
    case kExitIo:
      return "io";
    case kExitParse:
      return "parse";
    case kExitDomain:
      return "domain";
    default:
      return "internal";
  }
}

// Single-line machine-readable failure report.
int fail(int exit_code, std::string message) {
  for (char& c : message)
    if (c == '\n' || c == '\r') c = ' ';
  std::cerr << "error: " << category_of(exit_code) << ": " << message << "\n";
  return exit_code;
}

int fail(rp_status s) { return fail(exit_code_of(s), rp_last_error()); }

int write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return fail(kExitIo, "cannot open for writing: " + path);
  out << text;
  out.flush();
  if (!out) return fail(kExitIo, "cannot write: " + path);
  return 0;
}

// Writes to the file when a path was given, otherwise to stdout.
int emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return 0;
  }
  if (int rc = write_text_file(path, text); rc != 0) return rc;
  std::cerr << "wrote " << path << "\n";
  return 0;
}

int read_text_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return fail(kExitIo, "cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) return fail(kExitIo, "cannot read: " + path);
  out = buf.str();
  return 0;
}

int load_dataset(const std::string& path, DatasetHandle& h) {
  if (rp_status s = rp_dataset_load(path.c_str(), &h.d); s != RP_OK)
    return fail(s);
  return 0;
}

// Every subcommand accepts --config (key = value lines; flags given on the
// command line override file values) and requires config-version 1. The
// bundled parser only auto-loads config files on the top-level command, so
// main() expands the file into synthetic tokens before parsing instead.
void add_config_support(CLI::App* cmd) {
  // The value is consumed by expand_config_tokens before parsing; the option
  // only has to exist so the token is accepted.
  cmd->add_option_function<std::string>(
      "--config", [](const std::string&) {},
      "key = value file supplying any flag of this subcommand");
  auto version = std::make_shared<int>(1);
  cmd->add_option("--config-version", *version,
                  "config file format version (must be 1)");
  cmd->parse_complete_callback([version] {
    if (*version != 1)
      throw CLI::ValidationError(
          "config-version",
          "unsupported config version " + std::to_string(*version));
  });
}

// Appends --key=value tokens for every config file entry whose option is not
// already on the command line, so explicit flags keep priority.
void expand_config_tokens(std::vector<std::string>& args) {
  const std::string eq_form = "--config=";
  std::string path;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (args[i].rfind(eq_form, 0) == 0) {
      path = args[i].substr(eq_form.size());
    }
  }
  if (path.empty()) return;
  CLI::ConfigINI reader;
  for (const CLI::ConfigItem& item : reader.from_file(path)) {
    const std::string flag = "--" + item.fullname();
    bool given = false;
    for (const std::string& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) {
        given = true;
        break;
      }
    }
    if (given) continue;
    if (item.inputs.empty()) args.push_back(flag);
    for (const std::string& v : item.inputs) args.push_back(flag + "=" + v);
  }
}

struct PrepFlags {
  double fixed_beta = -1.0;  // < 0 means search
  double beta_step = 0.01;
  int mrr_k = 10;

  void attach(CLI::App* cmd) {
    cmd->add_option("--beta", fixed_beta,
                    "fixed fusion weight in [0,1]; omit to search");
    cmd->add_option("--beta-step", beta_step, "fusion weight search step");
    cmd->add_option("--mrr-k", mrr_k, "rank cutoff for the fusion search");
  }

  json to_json() const {
    json j;
    if (fixed_beta >= 0.0) j["fixed_beta"] = fixed_beta;
    j["beta_step"] = beta_step;
    j["mrr_k"] = mrr_k;
    return j;
  }
};

struct CalibrateFlags {
  double alpha = 0.1;
  double delta = 0.1;
  std::string mode = "both";
  std::string metric = "mrr@10";
  double grid_step = 1e-4;
  bool exact = false;
  std::string wsr = "predictable";
  bool hoeffding = false;
  int64_t shuffle_seed = -1;  // < 0 means none
  int workers = 1;

  void attach(CLI::App* cmd, bool with_workers) {
    cmd->add_option("--alpha", alpha, "risk level in (0,1]");
    cmd->add_option("--delta", delta, "miscoverage budget in (0,1]");
    cmd->add_option("--mode", mode, "correction when unachievable")
        ->check(CLI::IsMember({"risk", "confidence", "both"}));
    cmd->add_option("--metric", metric, "loss metric: mrr@K or recall");
    cmd->add_option("--grid-step", grid_step, "threshold grid step");
    cmd->add_flag("--exact", exact,
                  "use the exact per-query breakpoint union as the grid");
    cmd->add_option("--compat-wsr", wsr,
                    "betting-bound variant: predictable or printed")
        ->check(CLI::IsMember({"predictable", "printed"}));
    cmd->add_flag("--hoeffding", hoeffding,
                  "closed-form Hoeffding bound instead of the betting bound");
    cmd->add_option("--shuffle-seed", shuffle_seed,
                    "shuffle query order before the bound "
                    "(order-sensitivity check)");
    if (with_workers)
      cmd->add_option("--workers", workers, "threads for the bound grid");
  }

  json to_json(bool with_workers) const {
    json j;
    j["alpha"] = alpha;
    j["delta"] = delta;
    j["mode"] = mode;
    j["metric"] = metric;
    j["grid_step"] = exact ? 0.0 : grid_step;
    j["wsr"] = wsr;
    j["hoeffding"] = hoeffding;
    if (shuffle_seed >= 0) j["shuffle_seed"] = shuffle_seed;
    if (with_workers) j["workers"] = workers;
    return j;
  }
};

struct TrialFlags {
  int n_trials = 100;
  size_t calib_size = 5000;
  size_t test_size = 6980;
  uint64_t seed = 1;
  int workers = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--n", n_trials, "number of trials");
    cmd->add_option("--calib-size", calib_size, "queries per calibration half");
    cmd->add_option("--test-size", test_size, "queries per test half");
    cmd->add_option("--seed", seed, "master seed; trials derive from it");
    cmd->add_option("--workers", workers, "parallel trial workers");
  }

  json to_json(const PrepFlags& prep, const CalibrateFlags& cal) const {
    json j;
    j["n_trials"] = n_trials;
    j["calib_size"] = calib_size;
    j["test_size"] = test_size;
    j["seed"] = seed;
    j["workers"] = workers;
    j["prep"] = prep.to_json();
    j["calibration"] = cal.to_json(false);
    return j;
  }
};

// ---- subcommand runners ----

struct IngestArgs {
  std::string retriever, reranker, qrels, out;
  int pool_size = 1000;
};

int run_ingest(const IngestArgs& a) {
  DatasetHandle d;
  if (rp_status s = rp_dataset_from_run_files(
          a.retriever.c_str(),
          a.reranker.empty() ? nullptr : a.reranker.c_str(), a.qrels.c_str(),
          a.pool_size, &d.d);
      s != RP_OK)
    return fail(s);
  if (rp_status s = rp_dataset_save(d.d, a.out.c_str()); s != RP_OK)
    return fail(s);
  StringHandle stats;
  if (rp_status s = rp_dataset_stats(d.d, &stats.s); s != RP_OK)
    return fail(s);
  std::cout << stats.str();
  std::cerr << "wrote " << a.out << "\n";
  return 0;
}

struct SynthArgs {
  int64_t n_queries = 1000;
  int pool_size = 100;
  int n_gold = 1;
  int n_gold_max = 0;
  double gap = 2.0;
  double noise = 1.0;
  std::string reranker = "consistent";
  double reranker_noise = 0.5;
  bool embedding = false;
  int embedding_dim = 16;
  uint64_t seed = 1;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  json cfg;
  cfg["n_queries"] = a.n_queries;
  cfg["pool_size"] = a.pool_size;
  cfg["n_gold"] = a.n_gold;
  cfg["n_gold_max"] = a.n_gold_max;
  cfg["gap"] = a.gap;
  cfg["noise"] = a.noise;
  cfg["reranker"] = a.reranker;
  cfg["reranker_noise"] = a.reranker_noise;
  cfg["embedding"] = a.embedding;
  cfg["embedding_dim"] = a.embedding_dim;
  cfg["seed"] = a.seed;
  DatasetHandle d;
  if (rp_status s = rp_dataset_synth(cfg.dump().c_str(), &d.d); s != RP_OK)
    return fail(s);
  if (rp_status s = rp_dataset_save(d.d, a.out.c_str()); s != RP_OK)
    return fail(s);
  StringHandle stats;
  if (rp_status s = rp_dataset_stats(d.d, &stats.s); s != RP_OK)
    return fail(s);
  std::cout << stats.str();
  std::cerr << "wrote " << a.out << "\n";
  return 0;
}

struct CalibrateArgs {
  std::string data;
  std::string out;
  std::string curve_out;
  PrepFlags prep;
  CalibrateFlags cal;
};

int run_calibrate(const CalibrateArgs& a) {
  DatasetHandle d;
  if (int rc = load_dataset(a.data, d); rc != 0) return rc;

  // Raw snapshots are prepared in place first and the fitted transform is
  // embedded in the result so it replays on held-out data.
  StringHandle stats;
  if (rp_status s = rp_dataset_stats(d.d, &stats.s); s != RP_OK)
    return fail(s);
  const bool fused = json::parse(stats.str()).at("fused").get<bool>();
  json options = a.cal.to_json(true);
  StringHandle prep_json;
  if (!fused) {
    if (rp_status s = rp_dataset_prepare(d.d, a.prep.to_json().dump().c_str(),
                                         &prep_json.s);
        s != RP_OK)
      return fail(s);
    options["preprocess"] = json::parse(prep_json.str());
  }
  const bool want_curve = !a.curve_out.empty();
  options["curve"] = want_curve;

  StringHandle result;
  StringHandle curve;
  if (rp_status s = rp_calibrate(d.d, options.dump().c_str(), &result.s,
                                 want_curve ? &curve.s : nullptr);
      s != RP_OK)
    return fail(s);
  if (int rc = emit(a.out, result.str()); rc != 0) return rc;
  if (want_curve) {
    if (int rc = write_text_file(a.curve_out, curve.str()); rc != 0) return rc;
    std::cerr << "wrote " << a.curve_out << "\n";
  }
  return 0;
}

struct EvaluateArgs {
  std::string data, calibration, out;
};

int run_evaluate(const EvaluateArgs& a) {
  DatasetHandle d;
  if (int rc = load_dataset(a.data, d); rc != 0) return rc;
  std::string calib_text;
  if (int rc = read_text_file(a.calibration, calib_text); rc != 0) return rc;
  StringHandle report;
  if (rp_status s = rp_evaluate(d.d, calib_text.c_str(), &report.s);
      s != RP_OK)
    return fail(s);
  return emit(a.out, report.str());
}

struct TrialsArgs {
  std::string pool;
  std::string out_dir;
  PrepFlags prep;
  CalibrateFlags cal;
  TrialFlags trials;
};

int run_trials_cmd(const TrialsArgs& a) {
  DatasetHandle d;
  if (int rc = load_dataset(a.pool, d); rc != 0) return rc;
  std::error_code ec;
  std::filesystem::create_directories(a.out_dir, ec);
  if (ec)
    return fail(kExitIo,
                "cannot create directory " + a.out_dir + ": " + ec.message());
  const json cfg = a.trials.to_json(a.prep, a.cal);
  StringHandle summary;
  StringHandle lines;
  if (rp_status s = rp_trials(d.d, cfg.dump().c_str(), &summary.s, &lines.s);
      s != RP_OK)
    return fail(s);
  if (int rc = write_text_file(a.out_dir + "/trials.jsonl", lines.str());
      rc != 0)
    return rc;
  if (int rc = write_text_file(a.out_dir + "/summary.json", summary.str());
      rc != 0)
    return rc;
  std::cout << summary.str();
  std::cerr << "wrote " << a.out_dir << "/trials.jsonl and " << a.out_dir
            << "/summary.json\n";
  return 0;
}

struct BaselineArgs {
  std::string pool;
  std::string method = "est";
  double required_mrr = 0.9;
  std::string out;
  std::string trials_out;
  PrepFlags prep;
  CalibrateFlags cal;
  TrialFlags trials;
};

int run_baseline(const BaselineArgs& a) {
  DatasetHandle d;
  if (int rc = load_dataset(a.pool, d); rc != 0) return rc;
  json cfg = a.trials.to_json(a.prep, a.cal);
  cfg["kind"] = a.method;
  cfg["required_mrr"] = a.required_mrr;
  const bool want_lines = !a.trials_out.empty();
  StringHandle summary;
  StringHandle lines;
  if (rp_status s = rp_baseline_trials(d.d, cfg.dump().c_str(), &summary.s,
                                       want_lines ? &lines.s : nullptr);
      s != RP_OK)
    return fail(s);
  if (int rc = emit(a.out, summary.str()); rc != 0) return rc;
  if (want_lines) {
    if (int rc = write_text_file(a.trials_out, lines.str()); rc != 0)
      return rc;
    std::cerr << "wrote " << a.trials_out << "\n";
  }
  return 0;
}

struct SweepArgs {
  std::string pool;
  std::vector<double> alphas;
  std::string out;
  PrepFlags prep;
  CalibrateFlags cal;
  TrialFlags trials;
};

int run_sweep(const SweepArgs& a, bool confidence) {
  DatasetHandle d;
  if (int rc = load_dataset(a.pool, d); rc != 0) return rc;
  json cfg = a.trials.to_json(a.prep, a.cal);
  cfg["alphas"] = a.alphas;
  StringHandle csv;
  rp_status s = confidence
                    ? rp_confidence_sweep(d.d, cfg.dump().c_str(), &csv.s)
                    : rp_tradeoff(d.d, cfg.dump().c_str(), &csv.s);
  if (s != RP_OK) return fail(s);
  return emit(a.out, csv.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certified candidate-set pruning for two-stage retrieval"};
  app.set_version_flag("--version", rp_version());
  app.require_subcommand(1);
  int rc = 0;

  IngestArgs ingest;
  CLI::App* c_ingest =
      app.add_subcommand("ingest", "join run files and qrels into a snapshot");
  c_ingest->add_option("--retriever-run", ingest.retriever, "TREC run file")
      ->required();
  c_ingest->add_option("--reranker-run", ingest.reranker,
                       "TREC run file with reranker scores");
  c_ingest->add_option("--qrels", ingest.qrels, "relevance judgments")
      ->required();
  c_ingest->add_option("--pool-size", ingest.pool_size,
                       "top candidates kept per query");
  c_ingest->add_option("--out", ingest.out, "snapshot path")->required();
  add_config_support(c_ingest);
  c_ingest->callback([&] { rc = run_ingest(ingest); });

  SynthArgs synth;
  CLI::App* c_synth =
      app.add_subcommand("synth", "generate a synthetic two-stage dataset");
  c_synth->add_option("--n-queries", synth.n_queries, "number of queries");
  c_synth->add_option("--pool-size", synth.pool_size, "candidates per query");
  c_synth->add_option("--n-gold", synth.n_gold, "gold documents per query");
  c_synth->add_option("--n-gold-max", synth.n_gold_max,
                      "upper end of a uniform gold count range");
  c_synth->add_option("--gap", synth.gap, "gold score shift");
  c_synth->add_option("--noise", synth.noise, "score spread");
  c_synth->add_option("--reranker", synth.reranker,
                      "consistent, noisy, or adversarial")
      ->check(CLI::IsMember({"consistent", "noisy", "adversarial"}));
  c_synth->add_option("--reranker-noise", synth.reranker_noise,
                      "spread of the noisy reranker");
  c_synth->add_flag("--embedding", synth.embedding,
                    "unit-vector embedding mode");
  c_synth->add_option("--embedding-dim", synth.embedding_dim,
                      "embedding dimension");
  c_synth->add_option("--seed", synth.seed, "generator seed");
  c_synth->add_option("--out", synth.out, "snapshot path")->required();
  add_config_support(c_synth);
  c_synth->callback([&] { rc = run_synth(synth); });

  CalibrateArgs calib;
  CLI::App* c_cal = app.add_subcommand(
      "calibrate", "certify a pruning threshold on calibration data");
  c_cal->add_option("--data", calib.data, "calibration snapshot")->required();
  c_cal->add_option("--out", calib.out, "result JSON path (default stdout)");
  c_cal->add_option("--curve-out", calib.curve_out, "risk curve CSV path");
  calib.prep.attach(c_cal);
  calib.cal.attach(c_cal, true);
  add_config_support(c_cal);
  c_cal->callback([&] { rc = run_calibrate(calib); });

  EvaluateArgs eval;
  CLI::App* c_eval = app.add_subcommand(
      "evaluate", "apply a saved calibration to held-out data");
  c_eval->add_option("--data", eval.data, "test snapshot")->required();
  c_eval
      ->add_option("--calibration", eval.calibration,
                   "calibration result JSON")
      ->required();
  c_eval->add_option("--out", eval.out, "report path (default stdout)");
  add_config_support(c_eval);
  c_eval->callback([&] { rc = run_evaluate(eval); });

  TrialsArgs trials;
  CLI::App* c_trials =
      app.add_subcommand("trials", "repeated random-split coverage experiment");
  c_trials->add_option("--pool", trials.pool, "pool snapshot")->required();
  c_trials->add_option("--out-dir", trials.out_dir, "output directory")
      ->required();
  trials.prep.attach(c_trials);
  trials.cal.attach(c_trials, false);
  trials.trials.attach(c_trials);
  add_config_support(c_trials);
  c_trials->callback([&] { rc = run_trials_cmd(trials); });

  SweepArgs tradeoff;
  CLI::App* c_tradeoff = app.add_subcommand(
      "tradeoff", "risk level versus quality, size, and coverage");
  c_tradeoff->add_option("--pool", tradeoff.pool, "pool snapshot")->required();
  c_tradeoff->add_option("--alphas", tradeoff.alphas, "risk levels")
      ->required()
      ->delimiter(',');
  c_tradeoff->add_option("--out", tradeoff.out, "CSV path (default stdout)");
  tradeoff.prep.attach(c_tradeoff);
  tradeoff.cal.attach(c_tradeoff, false);
  tradeoff.trials.attach(c_tradeoff);
  add_config_support(c_tradeoff);
  c_tradeoff->callback([&] { rc = run_sweep(tradeoff, false); });

  SweepArgs sweep;
  CLI::App* c_sweep = app.add_subcommand(
      "sweep-confidence",
      "achieved confidence after correction across risk levels");
  c_sweep->add_option("--pool", sweep.pool, "pool snapshot")->required();
  c_sweep->add_option("--alphas", sweep.alphas, "risk levels")
      ->required()
      ->delimiter(',');
  c_sweep->add_option("--out", sweep.out, "CSV path (default stdout)");
  sweep.prep.attach(c_sweep);
  sweep.cal.attach(c_sweep, false);
  sweep.trials.attach(c_sweep);
  add_config_support(c_sweep);
  c_sweep->callback([&] { rc = run_sweep(sweep, true); });

  BaselineArgs baseline;
  CLI::App* c_base = app.add_subcommand(
      "baseline", "uncertified tuning baselines on the trial splits");
  c_base->add_option("--method", baseline.method, "est or ert")
      ->required()
      ->check(CLI::IsMember({"est", "ert"}));
  c_base->add_option("--pool", baseline.pool, "pool snapshot")->required();
  c_base
      ->add_option("--required-mrr", baseline.required_mrr,
                   "MRR target the baseline tunes to")
      ->required();
  c_base->add_option("--out", baseline.out, "summary path (default stdout)");
  c_base->add_option("--trials-out", baseline.trials_out,
                     "per-trial JSONL path");
  baseline.prep.attach(c_base);
  baseline.cal.attach(c_base, false);
  baseline.trials.attach(c_base);
  add_config_support(c_base);
  c_base->callback([&] { rc = run_baseline(baseline); });

  app.name(argc > 0 ? argv[0] : "riskprune");
  std::vector<std::string> args;
  args.reserve(argc > 0 ? static_cast<size_t>(argc) - 1 : 0);
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);

  try {
    expand_config_tokens(args);
    // The vector overload consumes tokens from the back.
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n' || c == '\r') c = ' ';
    std::cerr << "error: usage: " << msg << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    return fail(kExitInternal, e.what());
  }
  return rc;
}
