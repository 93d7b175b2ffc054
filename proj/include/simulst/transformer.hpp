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

// Pre-norm Transformer encoder/decoder with three source encoders:
//
//   bidirectional   full self-attention (teacher, offline model)
//   recompute       bidirectional attention restricted to the g(t) prefix,
//                   re-run for every distinct g(t) (wait-k baseline)
//   unidirectional  causal self-attention; earlier rows never change when a
//                   token is appended, so streaming needs one pass per token
//
// The incremental student adds the Average Embedding Layer in the final
// decoder layer: with A_i the mean of the first i source embeddings and
// f_i = A_i W, cross-attention at step t reads h[g(t)][j] = f_{g(t)} + z_j.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "simulst/schedule.hpp"
#include "simulst/tensor.hpp"

namespace simulst {

using TokenId = std::uint32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;  // filler token in synthetic tasks
inline constexpr std::size_t kReservedTokens = 4;

struct ModelConfig {
  std::size_t n_layers = 2;
  std::size_t d_model = 32;
  std::size_t n_heads = 2;
  std::size_t d_ff = 64;
  std::size_t src_vocab = 32;
  std::size_t tgt_vocab = 32;
  std::size_t max_len = 64;
  std::size_t wait_k = 3;

  std::size_t d_k() const { return d_model / n_heads; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

enum class ModelVariant {
  teacher,          // bidirectional encoder, full-source decoder
  baseline_bi,      // wait-k with per-step bidirectional re-encoding
  baseline_uni,     // wait-k with the unidirectional encoder, no AEL
  incremental_ael,  // unidirectional encoder + AEL in the last decoder layer
};

std::string_view variant_name(ModelVariant v);
ModelVariant parse_variant(std::string_view name);

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
};

struct Norm {
  Tensor gain;
  Tensor bias;
};

struct AttentionWeights {
  Linear query, key, value, output;
};

struct EncoderLayer {
  Norm norm1;
  AttentionWeights self;
  Norm norm2;
  Linear ff1, ff2;
};

struct DecoderLayer {
  Norm norm1;
  AttentionWeights self;
  Norm norm2;
  AttentionWeights cross;
  Norm norm3;
  Linear ff1, ff2;
};

using NamedTensor = std::pair<std::string, Tensor>;

class TransformerModel {
 public:
  // Matrices ~ U(-1/sqrt(d_model), 1/sqrt(d_model)); biases zero; norm gains 1.
  TransformerModel(const ModelConfig& config, ModelVariant variant,
                   std::uint64_t seed);

  TransformerModel(const TransformerModel&) = delete;
  TransformerModel& operator=(const TransformerModel&) = delete;
  TransformerModel(TransformerModel&&) = default;
  TransformerModel& operator=(TransformerModel&&) = default;

  // Deep copy with fresh parameter tensors.
  TransformerModel clone() const;

  const ModelConfig& config() const noexcept { return config_; }
  ModelVariant variant() const noexcept { return variant_; }
  bool has_ael() const noexcept { return variant_ == ModelVariant::incremental_ael; }
  bool unidirectional() const noexcept {
    return variant_ == ModelVariant::baseline_uni || has_ael();
  }

  // Stable order; names are used by the checkpoint format.
  std::vector<NamedTensor> parameters() const;
  void set_trainable(bool trainable);
  void zero_grad();
  std::size_t parameter_count() const;

  Tensor src_embed;
  Tensor tgt_embed;
  std::vector<EncoderLayer> encoder;
  Norm encoder_norm;
  std::vector<DecoderLayer> decoder;
  Norm decoder_norm;
  Linear output;
  Tensor ael_weight;  // [d_model x d_model], incremental_ael only

 private:
  ModelConfig config_;
  ModelVariant variant_;
};

// --- building blocks ---------------------------------------------------------

Tensor positional_encoding(std::size_t positions, std::size_t d_model,
                           std::size_t offset = 0);
// table[ids] * sqrt(d_model) + positional encoding starting at offset.
Tensor embed_tokens(const Tensor& table, std::span<const TokenId> ids,
                    std::size_t offset = 0);

// Scaled dot-product attention over already projected q/k/v, per head, with
// heads concatenated. No output projection.
Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v,
              const Mask& mask, std::size_t n_heads);

Tensor multi_head_attention(const AttentionWeights& w, const Tensor& queries,
                            const Tensor& keys, const Tensor& values,
                            const Mask& mask, std::size_t n_heads);

// --- encoders ----------------------------------------------------------------

struct EncoderOutput {
  Tensor z;           // [n x d_model] final-layer states
  Tensor embeddings;  // [n x d_model] encoder input E (positional included)
  std::size_t n = 0;
};

EncoderOutput encode_bidirectional(const TransformerModel& model,
                                   std::span<const TokenId> src);
EncoderOutput encode_unidirectional(const TransformerModel& model,
                                    std::span<const TokenId> src);

// One [n x d_model] tensor per decoding step t = 1..steps holding the prefix
// x[1..g(t)] re-encoded with bidirectional attention limited to that prefix.
// Every pass runs over all n positions under the prefix mask; rows past g(t)
// are zero. Steps that share g(t) share one pass.
std::vector<Tensor> encode_waitk_recompute(const TransformerModel& model,
                                           std::span<const TokenId> src,
                                           const WaitKSchedule& schedule,
                                           std::size_t steps);

// Per-layer key/value cache of the unidirectional encoder.
class UniEncoderState {
 public:
  explicit UniEncoderState(const TransformerModel& model);

  std::size_t size() const noexcept { return count_; }
  const TransformerModel* model() const noexcept { return model_; }
  // Rows 0..size()-1 of the encoder output and of its input embeddings.
  Tensor z() const;
  Tensor embeddings() const;

 private:
  friend Tensor encode_unidirectional_streaming(const TransformerModel&,
                                                UniEncoderState&, TokenId);
  const TransformerModel* model_;
  std::size_t count_ = 0;
  std::vector<std::vector<double>> keys_;    // per layer, count_ x d_model
  std::vector<std::vector<double>> values_;  // per layer
  std::vector<double> embeddings_;
  std::vector<double> z_;
};

// Encodes one more source token; returns its [1 x d_model] state.
Tensor encode_unidirectional_streaming(const TransformerModel& model,
                                       UniEncoderState& state, TokenId token);

// --- average embedding layer ---------------------------------------------------

// h stored as {n, n, d}: h[i][j] = f_i + z_j for j <= i, zero otherwise
// (0-based: row i is the state after reading i+1 tokens).
struct IncrementalHiddenStates {
  Tensor h;
  std::size_t n = 0;

  // The g rows h[g-1][0..g-1] used at a step with g tokens read.
  Tensor slice(std::size_t g) const;
};

// f = cumulative_mean(E) * W, one row per prefix length.
Tensor ael_summary(const Tensor& embeddings, const Tensor& weight);

IncrementalHiddenStates ael_forward(const Tensor& embeddings, const Tensor& z,
                                    const Tensor& weight);

// Streaming running mean of source embeddings.
class AelState {
 public:
  explicit AelState(std::size_t d_model);
  void push(std::span<const double> embedding);
  std::size_t count() const noexcept { return count_; }
  std::span<const double> running_sum() const { return sum_; }
  // [1 x d] mean of the pushed embeddings.
  Tensor mean() const;
  // [1 x d] f = mean * W.
  Tensor summary(const Tensor& weight) const;

 private:
  std::vector<double> sum_;
  std::size_t count_ = 0;
};

// --- decoder -------------------------------------------------------------------

// Source side of cross-attention for every decoder row.
struct CrossSource {
  Tensor memory;                     // shared z [n x d]
  std::vector<Tensor> per_step;      // recompute baseline: z^(t) per row
  std::vector<std::size_t> visible;  // g(t) per row; empty means all of n
  Tensor ael_summary;                // f [n x d]; last layer only when set
};

// Teacher-forced decoder over all rows at once; logits [T x tgt_vocab].
Tensor decode_batched(const TransformerModel& model,
                      std::span<const TokenId> decoder_input,
                      const CrossSource& source);

// Source side of one decoder step.
struct StepSource {
  Tensor memory;            // at least g rows of source states
  std::size_t g = 0;        // tokens read at this step
  Tensor ael_row;           // [1 x d] f_g, or undefined without AEL
  bool append_only = true;  // memory rows never change between steps
};

// Per-layer self-attention cache plus projected cross-attention rows of a
// memory that only grows (unidirectional encoders).
class DecoderState {
 public:
  explicit DecoderState(const TransformerModel& model);
  std::size_t position() const noexcept { return position_; }

 private:
  friend Tensor decode_step(const TransformerModel&, DecoderState&, TokenId,
                            const StepSource&);
  const TransformerModel* model_;
  std::size_t position_ = 0;
  std::vector<std::vector<double>> self_keys_, self_values_;
  std::vector<std::vector<double>> cross_keys_, cross_values_;
};

// One decoder step for the token fed at the current position; logits [1 x V].
Tensor decode_step(const TransformerModel& model, DecoderState& state,
                   TokenId previous, const StepSource& source);

// --- whole-model passes ------------------------------------------------------

std::vector<TokenId> decoder_input_for(std::span<const TokenId> target);
std::vector<TokenId> decoder_targets_for(std::span<const TokenId> target);

struct ForwardResult {
  Tensor logits;
  EncoderOutput encoder;
};

ForwardResult forward_teacher(const TransformerModel& model,
                              std::span<const TokenId> src,
                              std::span<const TokenId> decoder_input);

// Wait-k forward for the baseline and incremental variants with all steps
// computed in one pass under the schedule's masks.
ForwardResult forward_student(const TransformerModel& model,
                              std::span<const TokenId> src,
                              std::span<const TokenId> decoder_input,
                              const WaitKSchedule& schedule);

}  // namespace simulst
