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

// Parallel data: synthetic tasks with oracle alignments, plain-text corpora,
// vocabularies and length-bucketed batches.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "simulst/transformer.hpp"

namespace simulst {

// (target index i, source index j), both 1-based.
using AlignmentLink = std::pair<std::size_t, std::size_t>;

struct ParallelExample {
  std::vector<TokenId> src;
  std::vector<TokenId> tgt;
  std::optional<std::vector<AlignmentLink>> alignment;
};

enum class TaskKind { copy, lagged_map };

std::string_view task_name(TaskKind kind);
TaskKind parse_task(std::string_view name);

struct SyntheticTaskSpec {
  TaskKind kind = TaskKind::copy;
  std::size_t vocab = 32;  // including the reserved ids
  std::size_t min_len = 5;
  std::size_t max_len = 12;
  std::size_t lag = 0;  // lagged_map only
  std::uint64_t seed = 1;
  // Source tokens follow a random walk over the content ids (step +1 with
  // probability 3/4, +2 otherwise, wrapping) instead of being drawn
  // independently, so unread tokens are partly predictable from read ones.
  bool walk = false;
};

// copy: tgt = src, alignment diagonal.
// lagged_map: tgt_i = src_{i+L} when i+L <= n, the filler kUnk otherwise;
// alignment (i, min(i+L, n)).
std::vector<ParallelExample> generate_synthetic(const SyntheticTaskSpec& spec,
                                                std::size_t count);

// Word <-> id map with ids 0..3 reserved for pad/bos/eos/unk.
class Vocabulary {
 public:
  Vocabulary();
  // Content words ordered by descending frequency, ties alphabetical.
  static Vocabulary from_counts(const std::map<std::string, std::size_t>& counts);
  // "w4".."w{V-1}" so that word ids equal token ids; used by synthetic tasks.
  static Vocabulary synthetic(std::size_t size);
  static Vocabulary from_words(std::vector<std::string> words);

  std::size_t size() const noexcept { return words_.size(); }
  TokenId id(std::string_view word) const;  // unknown words map to kUnk
  const std::string& word(TokenId id) const;
  const std::vector<std::string>& words() const noexcept { return words_; }

  std::vector<TokenId> encode(std::string_view line) const;
  std::string decode(std::span<const TokenId> ids) const;

  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, TokenId, std::less<>> index_;
};

std::vector<std::string> split_words(std::string_view line);

struct Corpus {
  std::vector<ParallelExample> examples;
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;
  std::size_t skipped_lines = 0;  // pairs with an empty side
};

// Whitespace-tokenised parallel files, one sentence per line. Line counts must
// agree; pairs with an empty side are skipped and counted. When vocabularies
// are given they are used as-is, otherwise they are built by frequency.
Corpus load_corpus(const std::filesystem::path& src_path,
                   const std::filesystem::path& tgt_path,
                   const Vocabulary* src_vocab = nullptr,
                   const Vocabulary* tgt_vocab = nullptr);

// Alignment file: one line per example, "i-j" links separated by spaces.
void write_alignments(const std::filesystem::path& path,
                      std::span<const ParallelExample> examples);
void attach_alignments(const std::filesystem::path& path,
                       std::vector<ParallelExample>& examples);

// Writes <dir>/<stem>.src, <stem>.tgt and <stem>.align.
void write_corpus(const std::filesystem::path& dir, const std::string& stem,
                  std::span<const ParallelExample> examples,
                  const Vocabulary& src_vocab, const Vocabulary& tgt_vocab);

struct Batch {
  std::vector<std::size_t> indices;  // into the example list
  std::size_t padded_len = 0;        // longest source in the batch
};

// Sorts by source length, cuts into batches of at most batch_size and shuffles
// the batch order with the seed.
std::vector<Batch> make_batches(std::span<const ParallelExample> examples,
                                std::size_t batch_size, std::uint64_t seed);

// Pads every source in the batch to padded_len with kPad; returns
// (tokens, keep mask) row-major [batch x padded_len].
std::pair<std::vector<TokenId>, std::vector<std::uint8_t>> pad_sources(
    std::span<const ParallelExample> examples, const Batch& batch);

}  // namespace simulst
