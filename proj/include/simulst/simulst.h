// Copyright 2026 The simulst Authors
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


#ifndef SIMULST_SIMULST_H_
#define SIMULST_SIMULST_H_

/* C interface of the simulst library: experiment commands and streaming
 * wait-k decoding behind opaque handles. Every function returning
 * simulst_status records a message retrievable with simulst_last_error()
 * on failure (per thread). */

#include <stddef.h>
#include <stdint.h>

#if defined(SIMULST_BUILDING_LIBRARY)
#define SIMULST_API __attribute__((visibility("default")))
#else
#define SIMULST_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum simulst_status {
  SIMULST_OK = 0,
  SIMULST_ERR_INTERNAL = 1,   /* contract, shape or state violation */
  SIMULST_ERR_USAGE = 2,      /* bad configuration or arguments */
  SIMULST_ERR_IO = 3,         /* missing or unreadable files */
  SIMULST_ERR_NUMERIC = 4,    /* non-finite values during training */
  SIMULST_ERR_CHECKPOINT = 5  /* corrupt or mismatched checkpoint */
} simulst_status;

typedef struct simulst_model simulst_model;
typedef struct simulst_stream simulst_stream;

/* Receives one emitted target word. */
typedef void (*simulst_emit_fn)(const char* word, void* user);

SIMULST_API const char* simulst_version(void);
/* Message of the last failure on this thread; "" when none. */
SIMULST_API const char* simulst_last_error(void);

/* Runs "gen-data", "train", "eval", "k-matrix" or "bench". config_path may be
 * NULL (built-in defaults); overrides are "key=value" strings applied in
 * order. Progress is written to standard output. */
SIMULST_API simulst_status simulst_run_command(const char* command,
                                               const char* config_path,
                                               const char* const* overrides,
                                               size_t n_overrides);

/* Loads the student model of a checkpoint. When config_path is non-NULL the
 * checkpoint must match its architecture. */
SIMULST_API simulst_status simulst_model_load(const char* checkpoint_path,
                                              const char* config_path,
                                              simulst_model** out);
SIMULST_API void simulst_model_free(simulst_model* model);
/* The k the model was trained with. */
SIMULST_API size_t simulst_model_wait_k(const simulst_model* model);

/* Opens a streaming decoder; k = 0 selects the model's training k. The model
 * must outlive the stream. */
SIMULST_API simulst_status simulst_stream_open(const simulst_model* model,
                                               size_t k, simulst_stream** out);
SIMULST_API void simulst_stream_free(simulst_stream* stream);
/* Reads one source word and reports every target word it unlocks. */
SIMULST_API simulst_status simulst_stream_push(simulst_stream* stream,
                                               const char* word,
                                               simulst_emit_fn emit, void* user);
/* Ends the source and reports the remaining target words. */
SIMULST_API simulst_status simulst_stream_finish(simulst_stream* stream,
                                                 simulst_emit_fn emit,
                                                 void* user);
/* Number of source words read so far. */
SIMULST_API size_t simulst_stream_read_count(const simulst_stream* stream);
/* JSON read/write trace; copies at most capacity bytes including the
 * terminator and stores the full length (without terminator) in *length. */
SIMULST_API simulst_status simulst_stream_trace(const simulst_stream* stream,
                                                char* buffer, size_t capacity,
                                                size_t* length);

#ifdef __cplusplus
}
#endif

#endif /* SIMULST_SIMULST_H_ */
