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


#include "simulst/simulst.h"

#include <cstring>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "simulst/commands.hpp"
#include "simulst/errors.hpp"
#include "simulst/streaming.hpp"

struct simulst_model {
  simulst::Checkpoint checkpoint;
};

struct simulst_stream {
  const simulst_model* model;
  simulst::StreamingDecoder decoder;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
simulst_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return SIMULST_OK;
  } catch (const simulst::Error& e) {
    g_last_error = e.what();
    return static_cast<simulst_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return SIMULST_ERR_INTERNAL;
}

void require(const void* p, const char* what) {
  if (!p) throw simulst::ConfigError(std::string(what) + " must not be NULL");
}

void report(const simulst_model& model, const std::vector<simulst::TokenId>& ids,
            simulst_emit_fn emit, void* user) {
  if (!emit) return;
  for (simulst::TokenId id : ids) {
    emit(model.checkpoint.tgt_vocab.word(id).c_str(), user);
  }
}

}  // namespace

extern "C" {

const char* simulst_version(void) { return "0.1.0"; }

const char* simulst_last_error(void) { return g_last_error.c_str(); }

simulst_status simulst_run_command(const char* command, const char* config_path,
                                   const char* const* overrides,
                                   size_t n_overrides) {
  return guarded([&] {
    require(command, "command");
    if (n_overrides) require(overrides, "overrides");
    std::vector<std::string> ov;
    for (size_t i = 0; i < n_overrides; ++i) {
      require(overrides[i], "override");
      ov.emplace_back(overrides[i]);
    }
    const simulst::ExperimentConfig config =
        config_path ? simulst::load_config(config_path, ov)
                    : simulst::parse_config("", ov);
    simulst::run_command(command, config, std::cout);
    std::cout.flush();
  });
}

simulst_status simulst_model_load(const char* checkpoint_path,
                                  const char* config_path, simulst_model** out) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint path");
    require(out, "output handle");
    *out = nullptr;
    std::optional<simulst::ExperimentConfig> config;
    if (config_path) config = simulst::load_config(config_path);
    auto model = std::make_unique<simulst_model>(simulst_model{
        simulst::load_checked_checkpoint(checkpoint_path,
                                         config ? &*config : nullptr)});
    *out = model.release();
  });
}

void simulst_model_free(simulst_model* model) { delete model; }

size_t simulst_model_wait_k(const simulst_model* model) {
  return model ? model->checkpoint.student.config().wait_k : 0;
}

simulst_status simulst_stream_open(const simulst_model* model, size_t k,
                                   simulst_stream** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "output handle");
    *out = nullptr;
    const size_t kk = k ? k : model->checkpoint.student.config().wait_k;
    *out = new simulst_stream{model,
                              simulst::StreamingDecoder(model->checkpoint.student, kk)};
  });
}

void simulst_stream_free(simulst_stream* stream) { delete stream; }

simulst_status simulst_stream_push(simulst_stream* stream, const char* word,
                                   simulst_emit_fn emit, void* user) {
  return guarded([&] {
    require(stream, "stream");
    require(word, "word");
    const simulst::TokenId id = stream->model->checkpoint.src_vocab.id(word);
    report(*stream->model, stream->decoder.push(id), emit, user);
  });
}

simulst_status simulst_stream_finish(simulst_stream* stream, simulst_emit_fn emit,
                                     void* user) {
  return guarded([&] {
    require(stream, "stream");
    report(*stream->model, stream->decoder.finish(), emit, user);
  });
}

size_t simulst_stream_read_count(const simulst_stream* stream) {
  return stream ? stream->decoder.read() : 0;
}

simulst_status simulst_stream_trace(const simulst_stream* stream, char* buffer,
                                    size_t capacity, size_t* length) {
  return guarded([&] {
    require(stream, "stream");
    const std::string json = stream->decoder.trace().to_json();
    if (length) *length = json.size();
    if (buffer && capacity) {
      const size_t n = std::min(capacity - 1, json.size());
      std::memcpy(buffer, json.data(), n);
      buffer[n] = '\0';
    }
  });
}

}  // extern "C"
