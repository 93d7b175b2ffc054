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


// simulst command-line tool. Every command goes through the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "simulst/simulst.h"

namespace {

int fail(simulst_status status) {
  std::cerr << "simulst: error: " << simulst_last_error() << '\n';
  return static_cast<int>(status);
}

struct Emitted {
  bool first = true;
};

void print_word(const char* word, void* user) {
  auto* state = static_cast<Emitted*>(user);
  if (!state->first) std::fputc(' ', stdout);
  std::fputs(word, stdout);
  std::fflush(stdout);
  state->first = false;
}

// Reads stdin one character at a time so each word is pushed as soon as it is
// complete; a newline ends the sentence.
int run_decode(const std::string& checkpoint, const std::string& config,
               std::size_t k, const std::string& trace_path) {
  simulst_model* model = nullptr;
  simulst_status st = simulst_model_load(checkpoint.c_str(),
                                         config.empty() ? nullptr : config.c_str(),
                                         &model);
  if (st != SIMULST_OK) return fail(st);
  std::ofstream trace;
  if (!trace_path.empty()) {
    trace.open(trace_path);
    if (!trace) {
      simulst_model_free(model);
      std::cerr << "simulst: error: cannot write " << trace_path << '\n';
      return SIMULST_ERR_IO;
    }
  }
  simulst_stream* stream = nullptr;
  Emitted emitted;
  std::string word;
  int code = 0;
  auto close_sentence = [&]() -> simulst_status {
    simulst_status s = SIMULST_OK;
    if (stream && simulst_stream_read_count(stream) > 0) {
      s = simulst_stream_finish(stream, print_word, &emitted);
      if (s == SIMULST_OK && trace) {
        size_t len = 0;
        simulst_stream_trace(stream, nullptr, 0, &len);
        std::string json(len + 1, '\0');
        simulst_stream_trace(stream, json.data(), json.size(), &len);
        json.resize(len);
        trace << json << '\n' << std::flush;
      }
    }
    if (stream) {
      std::fputc('\n', stdout);
      std::fflush(stdout);
    }
    simulst_stream_free(stream);
    stream = nullptr;
    emitted = Emitted{};
    return s;
  };
  auto flush_word = [&]() -> simulst_status {
    if (word.empty()) return SIMULST_OK;
    if (!stream) {
      const simulst_status s = simulst_stream_open(model, k, &stream);
      if (s != SIMULST_OK) return s;
    }
    const simulst_status s = simulst_stream_push(stream, word.c_str(), print_word, &emitted);
    word.clear();
    return s;
  };
  int ch;
  while ((ch = std::cin.get()) != EOF) {
    simulst_status s = SIMULST_OK;
    if (ch == '\n') {
      s = flush_word();
      if (s == SIMULST_OK) s = close_sentence();
    } else if (ch == ' ' || ch == '\t' || ch == '\r') {
      s = flush_word();
    } else {
      word.push_back(static_cast<char>(ch));
    }
    if (s != SIMULST_OK) {
      code = fail(s);
      break;
    }
  }
  if (code == 0) {
    simulst_status s = flush_word();
    if (s == SIMULST_OK) s = close_sentence();
    if (s != SIMULST_OK) code = fail(s);
  }
  simulst_stream_free(stream);
  simulst_model_free(model);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wait-k simultaneous translation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", simulst_version());

  std::string config;
  std::vector<std::string> overrides;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen-data", "Generate the synthetic train/test corpora"},
      {"train", "Train a student (and teacher) and write a checkpoint"},
      {"eval", "Stream the test set through a checkpoint and score it"},
      {"k-matrix", "Train at several k and score every test k"},
      {"bench", "Time and count the encoder variants"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config, "key=value config file")
        ->check(CLI::ExistingFile);
    sub->add_option("overrides", overrides, "key=value overrides");
  }

  std::string checkpoint = "run/model.ckpt";
  std::size_t decode_k = 0;
  std::string trace_path;
  CLI::App* decode = app.add_subcommand(
      "decode", "Translate whitespace-separated words from standard input");
  decode->add_option("--checkpoint", checkpoint, "checkpoint file")
      ->capture_default_str();
  decode->add_option("-c,--config", config,
                     "config whose architecture the checkpoint must match")
      ->check(CLI::ExistingFile);
  decode->add_option("-k,--wait-k", decode_k, "wait-k lag (default: training k)");
  decode->add_option("--trace", trace_path, "write one JSON trace per line here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    std::cerr << app.help();
    return SIMULST_ERR_USAGE;
  }

  if (decode->parsed()) return run_decode(checkpoint, config, decode_k, trace_path);
  for (const auto& [name, help] : commands) {
    if (!app.got_subcommand(name)) continue;
    std::vector<const char*> ov;
    for (const auto& o : overrides) ov.push_back(o.c_str());
    const simulst_status st = simulst_run_command(
        name.c_str(), config.empty() ? nullptr : config.c_str(), ov.data(), ov.size());
    return st == SIMULST_OK ? 0 : fail(st);
  }
  return SIMULST_ERR_USAGE;
}
