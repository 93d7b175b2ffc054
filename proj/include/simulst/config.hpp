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


#pragma once

// Experiment configuration: a flat key=value file that is the single source of
// truth for a run, with command-line key=value overrides on top.
//
//   # comment
//   model.d_model = 32
//   train.lambda = 0.1
//   kmatrix.train_k = 1,3,5

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "simulst/bench.hpp"
#include "simulst/data.hpp"
#include "simulst/training.hpp"
#include "simulst/transformer.hpp"

namespace simulst {

struct ExperimentConfig {
  ModelConfig model;
  ModelVariant variant = ModelVariant::incremental_ael;
  std::uint64_t model_seed = 1;
  TrainConfig train;
  SyntheticTaskSpec task;
  std::size_t train_size = 2000;
  std::size_t test_size = 200;
  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir = "run";
  std::filesystem::path checkpoint;  // defaults to <out_dir>/model.ckpt
  std::size_t eval_k = 0;            // 0: use train.k
  std::vector<std::size_t> kmatrix_train_k = {1, 3, 5};
  std::vector<std::size_t> kmatrix_test_k = {1, 3, 5};
  std::vector<std::size_t> bench_n = {16, 32, 64};
  std::vector<std::size_t> bench_k = {1, 3, 5};
  std::size_t bench_trials = 5;
  std::size_t bench_batch = 1;

  // Sets one key from its textual value; ConfigError on an unknown key or a
  // malformed value.
  void set(std::string_view key, std::string_view value);
  // Parses "key=value".
  void apply_override(std::string_view assignment);
  // Cross-field checks.
  void validate() const;

  std::filesystem::path checkpoint_path() const;
  std::size_t test_k() const { return eval_k ? eval_k : train.k; }

  // Every key with its current value, one "key = value" line each, sorted.
  std::string to_text() const;
  static std::vector<std::string> keys();
};

// Reads a config file (IoError when missing, ConfigError when malformed) and
// applies the overrides in order.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

ExperimentConfig parse_config(std::string_view text,
                              const std::vector<std::string>& overrides = {});

}  // namespace simulst
