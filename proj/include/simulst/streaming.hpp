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

// Streaming greedy wait-k decoding.
//
// The decoder reads k source tokens, then alternates one write with one read.
// Once the source is finished it keeps writing against the whole source until
// it emits EOS or reaches 2|x| + 5 tokens. Offline (teacher) models write
// nothing until the source is finished.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simulst/transformer.hpp"

namespace simulst {

// Realised read/write sequence of one sentence. EOS is not part of it.
struct DecodeTrace {
  std::vector<std::size_t> g;  // source tokens read before each emission
  std::size_t src_len = 0;
  std::size_t tgt_len = 0;
  std::vector<TokenId> tokens;

  std::string to_json() const;
  static DecodeTrace from_json(const std::string& line);
};

// Tail length limit 2|x| + 5.
std::size_t tail_limit(std::size_t src_len);

// Source buffer that remembers the furthest position ever read from it.
class SourceReader {
 public:
  void append(TokenId token) { tokens_.push_back(token); }
  std::size_t available() const noexcept { return tokens_.size(); }
  TokenId at(std::size_t index);  // 0-based; records the access
  std::span<const TokenId> prefix(std::size_t count);  // records count - 1
  // One past the furthest index read, 0 before any access.
  std::size_t high_water() const noexcept { return high_water_; }

 private:
  std::vector<TokenId> tokens_;
  std::size_t high_water_ = 0;
};

class StreamingDecoder {
 public:
  // max_len 0 selects the tail limit 2|x| + 5 once |x| is known.
  StreamingDecoder(const TransformerModel& model, std::size_t k,
                   std::size_t max_len = 0);

  // Reads one source token; returns the target tokens it unlocked.
  std::vector<TokenId> push(TokenId token);
  // Marks the end of the source and writes the tail.
  std::vector<TokenId> finish();

  bool done() const noexcept { return done_; }
  bool finished_source() const noexcept { return source_done_; }
  std::size_t read() const noexcept { return reader_.available(); }
  const DecodeTrace& trace() const noexcept { return trace_; }
  // Furthest source position touched before each emission (EOS included).
  const std::vector<std::size_t>& access_log() const noexcept { return access_; }

 private:
  bool can_write() const;
  // Runs one decoder step with g source tokens visible; returns the argmax.
  TokenId step(std::size_t g);
  void emit(std::vector<TokenId>& out);

  const TransformerModel* model_;
  std::size_t k_;
  std::size_t max_len_;
  SourceReader reader_;
  std::optional<UniEncoderState> uni_;
  std::optional<AelState> ael_;
  std::vector<double> summaries_;  // f_i rows for AEL, one per source token
  Tensor offline_memory_;          // teacher: encoding of the whole source
  DecoderState decoder_;
  TokenId previous_ = kBos;
  std::size_t written_ = 0;  // emissions, EOS included
  bool source_done_ = false;
  bool done_ = false;
  DecodeTrace trace_;
  std::vector<std::size_t> access_;
};

struct DecodeResult {
  std::vector<TokenId> tokens;
  DecodeTrace trace;
};

// Feeds the whole source through a StreamingDecoder.
DecodeResult streaming_decode(const TransformerModel& model,
                              std::span<const TokenId> src, std::size_t k,
                              std::size_t max_len = 0);

// Oracle: greedy decode that re-runs the batched masked forward pass over the
// whole prefix for every new token.
DecodeResult greedy_decode_batched(const TransformerModel& model,
                                   std::span<const TokenId> src, std::size_t k,
                                   std::size_t max_len = 0);

// Index of the largest value; ties go to the lowest index.
TokenId argmax_token(std::span<const double> logits);

}  // namespace simulst
