// Copyright 2026 The ecss-desk Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ECSS_ECSS_H_
#define ECSS_ECSS_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ECSS_API __declspec(dllexport)
#else
#define ECSS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ecss_status {
  ECSS_OK = 0,
  ECSS_ERR_VALIDATION = 1,
  ECSS_ERR_CONFIG = 2,
  ECSS_ERR_PARSE = 3,
  ECSS_ERR_LOOKUP = 4,
  ECSS_ERR_IO = 5,
  ECSS_ERR_INTEGRITY = 6,
  ECSS_ERR_RUNTIME = 7,
  ECSS_ERR_ARGUMENT = 8
} ecss_status;

typedef struct ecss_corpus ecss_corpus;
typedef struct ecss_model ecss_model;

typedef enum ecss_split { ECSS_SPLIT_TRAIN = 0, ECSS_SPLIT_VAL = 1, ECSS_SPLIT_TEST = 2 } ecss_split;

typedef struct ecss_losses {
  long step;
  double l_cl_emo;
  double l_cl_int;
  double l_mse_pro;
  double l_fs2;
  double total;
  double fs2_mel;
  double fs2_pitch;
  double fs2_energy;
  double fs2_duration;
  double probe_emo;
  double probe_int;
} ecss_losses;

/* Called after every optimizer step. `run` names the training run inside a
   sweep or ablation suite and is "train" otherwise. */
typedef void (*ecss_step_callback)(const char* run, const ecss_losses* losses, void* user);

/* Message of the last failure on the calling thread, "" if none. */
ECSS_API const char* ecss_last_error(void);
ECSS_API const char* ecss_version(void);
/* Releases strings returned through char** out-parameters. */
ECSS_API void ecss_string_free(char* s);

/* Corpus. The generator config is a JSON object whose keys are all optional:
   n_conversations, mean_turns, vocab_size, label_mode, persistence, seed,
   threads. */
ECSS_API ecss_status ecss_corpus_generate(const char* config_json, ecss_corpus** out);
ECSS_API ecss_status ecss_corpus_load(const char* path, ecss_corpus** out);
ECSS_API ecss_status ecss_corpus_save(const ecss_corpus* corpus, const char* path);
ECSS_API ecss_status ecss_corpus_split(const ecss_corpus* corpus, ecss_split split,
                                       ecss_corpus** out);
ECSS_API ecss_status ecss_corpus_stats(const ecss_corpus* corpus, char** json_out);
ECSS_API size_t ecss_corpus_size(const ecss_corpus* corpus);
ECSS_API void ecss_corpus_free(ecss_corpus* corpus);

/* Full training config from a profile plus overrides. Recognised keys:
   profile ("lite", "paper", "toy"), ablation ("none", "emotion",
   "intensity", "speaker", "audio", "supcon") and every scalar training
   field (batch_size, learning_rate, max_steps, context_length, seed,
   threads, ...). Unknown keys are a config error. */
ECSS_API ecss_status ecss_train_config(const char* overrides_json, char** json_out);

/* Training. */
ECSS_API ecss_status ecss_train(const ecss_corpus* train_set, const char* config_json,
                                ecss_step_callback on_step, void* user, ecss_model** out);
/* Continues a checkpoint up to `max_steps` on `threads` workers (0 keeps
   the stored count). */
ECSS_API ecss_status ecss_train_resume(const ecss_corpus* train_set,
                                       const char* checkpoint_path, long max_steps,
                                       unsigned threads, ecss_step_callback on_step,
                                       void* user, ecss_model** out);
ECSS_API ecss_status ecss_model_save(const ecss_model* model, const char* path);
ECSS_API ecss_status ecss_model_load(const char* path, ecss_model** out);
ECSS_API ecss_status ecss_model_config(const ecss_model* model, char** json_out);
ECSS_API long ecss_model_step(const ecss_model* model);
ECSS_API void ecss_model_free(ecss_model* model);

/* Metrics CSV helpers. */
ECSS_API const char* ecss_metrics_header(void);
ECSS_API ecss_status ecss_metrics_row(const ecss_losses* losses, char** row_out);

/* Evaluation over every window of `test_set`. Either output may be NULL.
   context_length <= 0 uses the model's training length. */
ECSS_API ecss_status ecss_evaluate(const ecss_model* model, const ecss_corpus* test_set,
                                   int context_length, unsigned threads,
                                   char** report_json, char** report_csv);
ECSS_API ecss_status ecss_sweep(const ecss_corpus* train_set, const ecss_corpus* test_set,
                                const char* config_json, const int* lengths,
                                size_t n_lengths, ecss_step_callback on_step, void* user,
                                char** csv_out, char** json_out);
ECSS_API ecss_status ecss_ablate(const ecss_corpus* train_set, const ecss_corpus* test_set,
                                 const char* config_json, ecss_step_callback on_step,
                                 void* user, char** csv_out, char** json_out);

/* Renders the current utterance of a context. The context JSON is one corpus
   record plus "current_index" (>= 1). Writes the mel binary to `mel_path`
   and returns the labels, durations and frame count as JSON. */
ECSS_API ecss_status ecss_predict(const ecss_model* model, const char* context_json,
                                  int context_length, const char* mel_path,
                                  char** result_json);

/* Confusion heatmap and CSV grid from an evaluation report JSON; `which` is
   "emotion" or "intensity". Either output may be NULL. */
ECSS_API ecss_status ecss_plot_confusion(const char* report_json, const char* which,
                                         char** svg_out, char** csv_out);

#ifdef __cplusplus
}
#endif

#endif
