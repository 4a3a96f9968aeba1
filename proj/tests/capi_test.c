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

/* The public header must compile as plain C; exercises status codes,
 * argument checks and a small end-to-end round trip. */

#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "mixocc/mixocc.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                 \
    }                                                             \
  } while (0)

int main(void) {
  char* json = NULL;
  mixocc_model* m = NULL;
  mixocc_dataset* d = NULL;
  int n_train = -1, n_val = -1;
  char path[512];
  const char* tmp = getenv("TMPDIR");

  EXPECT(strlen(mixocc_version()) > 0);
  EXPECT(strcmp(mixocc_status_name(MIXOCC_OK), mixocc_status_name(MIXOCC_ERR_IO)) != 0);
  EXPECT(mixocc_set_threads(1) == MIXOCC_OK);
  EXPECT(mixocc_set_threads(0) == MIXOCC_ERR_INVALID_ARGUMENT);

  /* Null arguments are rejected with a message. */
  EXPECT(mixocc_config_json(NULL, NULL) == MIXOCC_ERR_INVALID_ARGUMENT);
  EXPECT(strlen(mixocc_last_error()) > 0);
  EXPECT(mixocc_model_create(NULL, 0, NULL) == MIXOCC_ERR_INVALID_ARGUMENT);
  EXPECT(mixocc_dataset_size(NULL, &n_train, &n_val) == MIXOCC_ERR_INVALID_ARGUMENT);
  EXPECT(mixocc_train(NULL, NULL, 0, NULL, NULL, NULL) == MIXOCC_ERR_INVALID_ARGUMENT);
  mixocc_model_free(NULL);
  mixocc_dataset_free(NULL);
  mixocc_free_string(NULL);

  /* Missing config file. */
  EXPECT(mixocc_config_json("/nonexistent/mixocc.json", &json) != MIXOCC_OK);
  EXPECT(json == NULL);

  EXPECT(mixocc_config_json(NULL, &json) == MIXOCC_OK);
  EXPECT(json != NULL && strstr(json, "\"detector\"") != NULL);
  mixocc_free_string(json);
  json = NULL;

  EXPECT(mixocc_dataset_synth(NULL, 2, 1, 5, &d) == MIXOCC_OK);
  EXPECT(mixocc_dataset_size(d, &n_train, &n_val) == MIXOCC_OK);
  EXPECT(n_train == 2 && n_val == 1);

  EXPECT(mixocc_model_create(NULL, 3, &m) == MIXOCC_OK);
  EXPECT(mixocc_train(m, d, 7, NULL, NULL, NULL) == MIXOCC_ERR_INVALID_ARGUMENT);
  EXPECT(mixocc_evaluate(m, d, 2, 0, &json) == MIXOCC_ERR_INVALID_ARGUMENT);
  EXPECT(mixocc_evaluate(m, d, 1, 0, &json) == MIXOCC_OK);
  EXPECT(json != NULL && strstr(json, "\"map\"") != NULL);
  mixocc_free_string(json);
  json = NULL;

  snprintf(path, sizeof path, "%s/mixocc_capi_test.weights", tmp ? tmp : "/tmp");
  EXPECT(mixocc_model_save_weights(m, path) == MIXOCC_OK);
  EXPECT(mixocc_model_load_weights(m, path) == MIXOCC_OK);
  remove(path);
  EXPECT(mixocc_model_load_weights(m, "/nonexistent/w.weights") == MIXOCC_ERR_IO);
  EXPECT(strlen(mixocc_last_error()) > 0);

  mixocc_model_free(m);
  mixocc_dataset_free(d);
  if (failures) fprintf(stderr, "%d failure(s)\n", failures);
  return failures ? 1 : 0;
}
