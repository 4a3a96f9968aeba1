// Copyright 2026 The mixocc Authors. All Rights Reserved.
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


#ifndef MIXOCC_MIXOCC_H_
#define MIXOCC_MIXOCC_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define MIXOCC_API __attribute__((visibility("default")))
#else
#define MIXOCC_API
#endif

typedef enum mixocc_status {
  MIXOCC_OK = 0,
  MIXOCC_ERR_INVALID_ARGUMENT = 1,
  MIXOCC_ERR_IO = 2,
  MIXOCC_ERR_CONFIG = 3,
  MIXOCC_ERR_NONFINITE = 4,
  MIXOCC_ERR_GEOMETRY = 5,
  MIXOCC_ERR_INTERNAL = 6
} mixocc_status;

typedef struct mixocc_model mixocc_model;
typedef struct mixocc_dataset mixocc_dataset;

/* Message of the last failed call on this thread ("" if none). */
MIXOCC_API const char* mixocc_last_error(void);
MIXOCC_API const char* mixocc_status_name(mixocc_status s);
MIXOCC_API const char* mixocc_version(void);
/* Strings returned through char** out-parameters are owned by the caller. */
MIXOCC_API void mixocc_free_string(char* s);
/* Number of intra-op threads used by the tensor library (default 1). */
MIXOCC_API mixocc_status mixocc_set_threads(int n);

/* Configuration as JSON text. `config_path` may be NULL for the defaults. */
MIXOCC_API mixocc_status mixocc_config_json(const char* config_path, char** out_json);

/* Synthetic dataset written under `root` (train/ and val/ splits). */
MIXOCC_API mixocc_status mixocc_generate_dataset(const char* config_path, const char* root, int n_train, int n_val,
                                                 uint64_t seed, int* placement_failures);
MIXOCC_API mixocc_status mixocc_dataset_open(const char* config_path, const char* root, mixocc_dataset** out);
/* In-memory synthetic dataset, no files involved. */
MIXOCC_API mixocc_status mixocc_dataset_synth(const char* config_path, int n_train, int n_val, uint64_t seed,
                                              mixocc_dataset** out);
MIXOCC_API mixocc_status mixocc_dataset_size(const mixocc_dataset* d, int* n_train, int* n_val);
MIXOCC_API void mixocc_dataset_free(mixocc_dataset* d);

/* New model with parameters initialized from `seed`. */
MIXOCC_API mixocc_status mixocc_model_create(const char* config_path, uint64_t seed, mixocc_model** out);
MIXOCC_API mixocc_status mixocc_model_load_weights(mixocc_model* m, const char* path);
MIXOCC_API mixocc_status mixocc_model_save_weights(mixocc_model* m, const char* path);
MIXOCC_API void mixocc_model_free(mixocc_model* m);

/* phase: 0 = early-matching pretraining, 1 = main training.
 * Per-epoch records go to <out_dir>/log.jsonl, checkpoints to
 * <out_dir>/<phase>_epochN.*; `resume_prefix` (may be NULL) continues a run.
 * `records_json` (may be NULL) receives the records as a JSON array. */
MIXOCC_API mixocc_status mixocc_train(mixocc_model* m, const mixocc_dataset* d, int phase, const char* out_dir,
                                      const char* resume_prefix, char** records_json);

/* split: 0 = train, 1 = val. occupancy: 0 evaluates detection only. */
MIXOCC_API mixocc_status mixocc_evaluate(mixocc_model* m, const mixocc_dataset* d, int split, int occupancy,
                                         char** result_json);

/* Predicts one image. The camera file has the dataset's .camera layout. The
 * label volume (uint16, D x W x H row-major) is written to `out_label_path`
 * when it is not NULL; detections and counts come back as JSON. */
MIXOCC_API mixocc_status mixocc_infer(mixocc_model* m, const char* png_path, const char* camera_path,
                                      const char* out_label_path, char** result_json);

/* Dense vs mixed decoding report (query counts, timing) with SVG plots in
 * `out_dir`. `options_json` may be NULL; see README for the keys. */
MIXOCC_API mixocc_status mixocc_bench(const char* config_path, const char* out_dir, const char* options_json,
                                      char** report_json);

#ifdef __cplusplus
}
#endif

#endif  // MIXOCC_MIXOCC_H_
