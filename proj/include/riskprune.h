/* Copyright 2026 The riskprune Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the riskprune library: certified candidate-set pruning for
 * two-stage retrieval ranking. Datasets are opaque handles; options and
 * results travel as JSON strings (documented in the project README), so the
 * ABI is a handful of functions and never changes with the option set.
 *
 * Conventions:
 *   - Every function returns rp_status; RP_OK is 0.
 *   - On failure, rp_last_error() returns a message for the calling thread,
 *     valid until that thread's next riskprune call.
 *   - char** outputs receive a NUL-terminated heap string to release with
 *     rp_string_free(); they are written only on RP_OK. Optional outputs
 *     accept NULL.
 *   - rp_dataset outputs are released with rp_dataset_free().
 */

#ifndef RISKPRUNE_H_
#define RISKPRUNE_H_

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#ifndef RP_API
#if defined(_WIN32)
#define RP_API
#else
#define RP_API __attribute__((visibility("default")))
#endif
#endif

typedef enum rp_status {
  RP_OK = 0,
  RP_ERR_IO = 1,               /* file missing or unreadable/unwritable */
  RP_ERR_PARSE = 2,            /* malformed file or JSON input */
  RP_ERR_DOMAIN = 3,           /* statistically or structurally invalid request */
  RP_ERR_INVALID_ARGUMENT = 4, /* bad parameter value or NULL pointer */
  RP_ERR_INTERNAL = 5
} rp_status;

typedef struct rp_dataset rp_dataset;

/* Library version, e.g. "1.0.0". Static storage; do not free. */
RP_API const char* rp_version(void);

/* Message for the calling thread's most recent failure. Never NULL. */
RP_API const char* rp_last_error(void);

RP_API void rp_string_free(char* s);
RP_API void rp_dataset_free(rp_dataset* dataset);

/* Text snapshot I/O (format in the README). */
RP_API rp_status rp_dataset_load(const char* path, rp_dataset** out);
RP_API rp_status rp_dataset_save(const rp_dataset* dataset, const char* path);

/* Builds a dataset from TREC-style run and qrels files, keeping the top
 * pool_size retriever candidates per query. reranker_path may be NULL when
 * no reranker run exists. */
RP_API rp_status rp_dataset_from_run_files(const char* retriever_path,
                                           const char* reranker_path,
                                           const char* qrels_path,
                                           int pool_size, rp_dataset** out);

/* Generates a synthetic two-stage ranking dataset; config_json documented in
 * the README ({} selects every default). */
RP_API rp_status rp_dataset_synth(const char* config_json, rp_dataset** out);

/* Row counts and metadata as JSON. */
RP_API rp_status rp_dataset_stats(const rp_dataset* dataset, char** out_json);

/* Fits score calibration and the fusion weight on this dataset and applies
 * them in place. options_json may be NULL for defaults. out_preprocess_json
 * (optional) receives the fitted transform for replay or for embedding into
 * a calibration via the "preprocess" option. */
RP_API rp_status rp_dataset_prepare(rp_dataset* dataset,
                                    const char* options_json,
                                    char** out_preprocess_json);

/* Certified threshold calibration on a prepared dataset. out_curve_csv
 * (optional) receives the risk curve when options request "curve": true. */
RP_API rp_status rp_calibrate(const rp_dataset* calib,
                              const char* options_json,
                              char** out_result_json, char** out_curve_csv);

/* Applies a saved calibration to held-out data and reports test risk,
 * MRR@10, mean retained size, and whether the certified constraint held.
 * When the calibration embeds a preprocess block it is replayed first. */
RP_API rp_status rp_evaluate(const rp_dataset* test,
                             const char* calibration_json,
                             char** out_report_json);

/* Repeated random-split coverage experiment. out_trials_jsonl (optional)
 * receives one JSON object per trial. */
RP_API rp_status rp_trials(const rp_dataset* pool, const char* config_json,
                           char** out_summary_json, char** out_trials_jsonl);

/* Uncertified tuning baselines (config selects "est" or "ert") on the same
 * splits rp_trials uses for the same seed. */
RP_API rp_status rp_baseline_trials(const rp_dataset* pool,
                                    const char* config_json,
                                    char** out_summary_json,
                                    char** out_trials_jsonl);

/* Risk-level sweeps; results as CSV. */
RP_API rp_status rp_tradeoff(const rp_dataset* pool, const char* config_json,
                             char** out_csv);
RP_API rp_status rp_confidence_sweep(const rp_dataset* pool,
                                     const char* config_json, char** out_csv);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* RISKPRUNE_H_ */
