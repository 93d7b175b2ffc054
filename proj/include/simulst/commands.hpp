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

// Command implementations shared by the C API and the command-line tool.
// Every command reads an ExperimentConfig, writes its artifacts below
// config.out_dir (gen-data: config.data_dir) and logs progress to `log`.

#include <filesystem>
#include <ostream>
#include <string_view>
#include <vector>

#include "simulst/checkpoint.hpp"
#include "simulst/config.hpp"

namespace simulst {

// Writes <data_dir>/{train,test}.{src,tgt,align}.
void command_gen_data(const ExperimentConfig& config, std::ostream& log);
// Trains on <data_dir>/train.*; writes the checkpoint, metrics.csv and the
// resolved config (config.txt).
void command_train(const ExperimentConfig& config, std::ostream& log);
// Evaluates the checkpoint on <data_dir>/test.*; writes eval.csv,
// traces.jsonl and hypotheses.txt.
void command_eval(const ExperimentConfig& config, std::ostream& log);
// Trains one model per kmatrix.train_k and writes kmatrix.csv.
void command_kmatrix(const ExperimentConfig& config, std::ostream& log);
// Runs the scaling sweep and writes bench.csv.
void command_bench(const ExperimentConfig& config, std::ostream& log);

// Dispatches by name ("gen-data", "train", "eval", "k-matrix", "bench");
// ConfigError for anything else.
void run_command(std::string_view name, const ExperimentConfig& config,
                 std::ostream& log);

// Loads a checkpoint and, when `config` is given, checks that its
// architecture matches (CheckpointError otherwise).
Checkpoint load_checked_checkpoint(const std::filesystem::path& path,
                                   const ExperimentConfig* config);

}  // namespace simulst
