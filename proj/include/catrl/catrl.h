/*
* Copyright 2026 The catrl Authors.
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*     https://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
* ============================================================================
*/

#ifndef CATRL_CATRL_H_
#define CATRL_CATRL_H_

/* C interface to libcatrl.
 *
 * Objects are opaque handles released with the matching *_free call. Every
 * fallible call returns a catrl_status; on failure the message is available
 * from catrl_last_error() on the same thread until the next call. Strings
 * returned through char** are owned by the caller (catrl_string_free).
 * Configuration is passed as JSON text; see README for the keys. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CATRL_API __declspec(dllexport)
#else
#define CATRL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as process exit codes of the command-line tool. */
typedef enum catrl_status {
  CATRL_OK = 0,
  CATRL_ERR_INTERNAL = 1,
  CATRL_ERR_CONFIG = 2,      /* bad config, schema mismatch, unreadable input */
  CATRL_ERR_CALIBRATION = 3, /* censoring calibration failed */
  CATRL_ERR_FIT = 4          /* positivity violated, empty stage, ... */
} catrl_status;

typedef struct catrl_dataset catrl_dataset;
typedef struct catrl_oracle catrl_oracle;
typedef struct catrl_policy catrl_policy;

CATRL_API const char* catrl_version(void);
CATRL_API const char* catrl_last_error(void);
CATRL_API void catrl_string_free(char* s);

/* Worker cap for parallel sections; n <= 0 restores the default. */
CATRL_API void catrl_set_threads(int n);
CATRL_API int catrl_threads(void);

/* ---- data ---- */

/* schema_json may be NULL to infer the schema from the header. */
CATRL_API catrl_status catrl_dataset_load_csv(const char* path, const char* schema_json, catrl_dataset** out);
/* comment lines are prefixed with '#'; may be NULL. */
CATRL_API catrl_status catrl_dataset_save_csv(const catrl_dataset* data, const char* path, const char* comment);
CATRL_API catrl_status catrl_dataset_to_csv(const catrl_dataset* data, const char* comment, char** csv);
CATRL_API size_t catrl_dataset_size(const catrl_dataset* data);
CATRL_API int catrl_dataset_stages(const catrl_dataset* data);
CATRL_API double catrl_dataset_censoring_rate(const catrl_dataset* data);
/* Schema as JSON. */
CATRL_API catrl_status catrl_dataset_schema(const catrl_dataset* data, char** schema_json);
/* Invariant violations as a JSON array; "[]" when consistent. */
CATRL_API catrl_status catrl_dataset_validate(const catrl_dataset* data, char** violations_json);
CATRL_API void catrl_dataset_free(catrl_dataset* data);

/* ---- simulation ---- */

/* covariates_csv may be NULL to use the built-in covariate sampler. */
CATRL_API catrl_status catrl_generate(const char* scenario_json, const char* covariates_csv, catrl_dataset** data,
                                      catrl_oracle** oracle);
CATRL_API catrl_status catrl_oracle_load(const char* path, catrl_oracle** out);
CATRL_API catrl_status catrl_oracle_save(const catrl_oracle* oracle, const char* path);
CATRL_API catrl_status catrl_oracle_to_json(const catrl_oracle* oracle, char** json);
CATRL_API double catrl_oracle_tau(const catrl_oracle* oracle);
CATRL_API void catrl_oracle_free(catrl_oracle* oracle);

/* ---- fitting ---- */

/* fit_config_json may be NULL for defaults. The fit log (per-stage trees and
 * nuisance diagnostics) is part of the policy JSON. */
CATRL_API catrl_status catrl_fit(const catrl_dataset* data, const char* fit_config_json, catrl_policy** out);
CATRL_API catrl_status catrl_policy_load(const char* path, catrl_policy** out);
CATRL_API catrl_status catrl_policy_save(const catrl_policy* policy, const char* path);
CATRL_API catrl_status catrl_policy_to_json(const catrl_policy* policy, char** json);
CATRL_API int catrl_policy_stages(const catrl_policy* policy);
/* Arm for the stage-k history h (0-based k), laid out as
 * [X_1, A_1, R_1, ..., X_k]. */
CATRL_API catrl_status catrl_policy_recommend(const catrl_policy* policy, int stage, const double* history, size_t length,
                                              int* arm);
/* Rules of every stage as indented text. */
CATRL_API catrl_status catrl_policy_rules(const catrl_policy* policy, char** text);
CATRL_API void catrl_policy_free(catrl_policy* policy);

/* Grid search over a JSON array of fit configs, or an object
 * {"configs": [...], "validation_fraction": f, "seed": s}. */
CATRL_API catrl_status catrl_gridsearch(const catrl_dataset* data, const char* grid_json, char** report_json);

/* ---- evaluation ---- */

/* Evaluates `policy` (NULL: baselines only). With an oracle the report holds
 * counterfactual metrics; with a dataset, the concordant-subgroup KM value.
 * options_json (may be NULL): {"tau", "n_mc", "seed", "zero_noise",
 * "with_baselines"}. The report is JSON; csv, when not NULL, receives the
 * same rows as CSV. */
CATRL_API catrl_status catrl_evaluate(const catrl_policy* policy, const catrl_dataset* data, const catrl_oracle* oracle,
                                      const char* options_json, char** report_json, char** report_csv);

/* Runs the benchmark grid. cache_dir (may be NULL) holds per-cell results
 * keyed by content hash so an interrupted run resumes. Any output pointer
 * may be NULL. */
CATRL_API catrl_status catrl_benchmark(const char* config_json, const char* cache_dir, char** report_json,
                                       char** report_csv, char** report_text, size_t* failed_cells,
                                       size_t* total_cells);

/* Writes through a temporary file and a rename, so readers never see a
 * partial file. */
CATRL_API catrl_status catrl_write_file_atomic(const char* path, const char* contents);

/* Hex content hash of a string (FNV-1a, 16 digits). */
CATRL_API catrl_status catrl_content_hash(const char* text, char** hex);

#ifdef __cplusplus
}
#endif

#endif /* CATRL_CATRL_H_ */
