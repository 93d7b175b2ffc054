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

// Checkpoint layout (version 1):
//
//   SIMULST-CHECKPOINT
//   version=1
//   <model config as key=value lines>
//   variant=<student variant>
//   teacher=0|1
//   meta.<key>=<value>            (any number)
//   src_vocab=<count>, then one word per line
//   tgt_vocab=<count>, then one word per line
//   end_header
//   param <model>.<name> <d0>x<d1>...   then numel little-endian f64, then '\n'
//   ...
//   checksum=<16 hex digits>      FNV-1a 64 of every preceding byte
//
// Loading restores every value bit for bit.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "simulst/data.hpp"
#include "simulst/transformer.hpp"

namespace simulst {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  TransformerModel student;
  std::optional<TransformerModel> teacher;
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;
  std::map<std::string, std::string> metadata;
};

void save_checkpoint(const std::filesystem::path& path,
                     const TransformerModel& student,
                     const TransformerModel* teacher,
                     const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                     const std::map<std::string, std::string>& metadata = {});

// Throws IoError when the file cannot be read and CheckpointError when it is
// malformed, fails its checksum or does not match its own header.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace simulst
