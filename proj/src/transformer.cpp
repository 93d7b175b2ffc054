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

#include "simulst/transformer.hpp"

#include <cmath>
#include <map>
#include <random>

#include "simulst/errors.hpp"

namespace simulst {

namespace {

Linear make_linear(std::size_t in, std::size_t out) {
  return {Tensor::zeros({in, out}), Tensor::zeros({out})};
}

Norm make_norm(std::size_t d) {
  return {Tensor({d}, std::vector<double>(d, 1.0)), Tensor::zeros({d})};
}

AttentionWeights make_attention(std::size_t d) {
  return {make_linear(d, d), make_linear(d, d), make_linear(d, d),
          make_linear(d, d)};
}

void push_linear(std::vector<NamedTensor>& out, const std::string& name,
                 const Linear& l) {
  out.emplace_back(name + ".weight", l.weight);
  out.emplace_back(name + ".bias", l.bias);
}

void push_norm(std::vector<NamedTensor>& out, const std::string& name,
               const Norm& n) {
  out.emplace_back(name + ".gain", n.gain);
  out.emplace_back(name + ".bias", n.bias);
}

void push_attention(std::vector<NamedTensor>& out, const std::string& name,
                    const AttentionWeights& a) {
  push_linear(out, name + ".query", a.query);
  push_linear(out, name + ".key", a.key);
  push_linear(out, name + ".value", a.value);
  push_linear(out, name + ".output", a.output);
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void check_source(const TransformerModel& model, std::span<const TokenId> src) {
  if (src.empty()) throw ContractError("empty source sequence");
  if (src.size() > model.config().max_len) {
    throw LengthError("source of " + std::to_string(src.size()) +
                      " tokens exceeds max_len " +
                      std::to_string(model.config().max_len));
  }
}

Tensor feed_forward(const Linear& ff1, const Linear& ff2, const Tensor& x) {
  return linear(relu(linear(x, ff1.weight, ff1.bias)), ff2.weight, ff2.bias);
}

Tensor norm(const Norm& n, const Tensor& x) {
  return layer_norm(x, n.gain, n.bias);
}

Tensor encoder_block(const EncoderLayer& layer, const Tensor& x,
                     const Mask& mask, std::size_t heads) {
  const Tensor h = norm(layer.norm1, x);
  const Tensor x1 = add(x, multi_head_attention(layer.self, h, h, h, mask, heads));
  return add(x1, feed_forward(layer.ff1, layer.ff2, norm(layer.norm2, x1)));
}

EncoderOutput run_encoder(const TransformerModel& model,
                          std::span<const TokenId> src, const Mask& mask) {
  const Tensor e = embed_tokens(model.src_embed, src);
  Tensor x = e;
  for (const auto& layer : model.encoder) {
    x = encoder_block(layer, x, mask, model.config().n_heads);
  }
  return {norm(model.encoder_norm, x), e, src.size()};
}

// Attention whose keys/values at row t are h[g_t][j] = f_{g_t} + z_j. The
// projection distributes over the sum, so keys are K(z_j) + W_K f_{g_t}; the
// per-row key shift enters the scores as q_t . W_K f_{g_t} and the value
// shift is added after weighting (softmax rows sum to one).
Tensor attend_ael(const Tensor& q, const Tensor& k, const Tensor& v,
                  const Tensor& f_keys, const Tensor& f_values,
                  const Mask& mask, std::size_t heads) {
  const std::size_t d = q.cols();
  const std::size_t dk = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t b = h * dk, e = b + dk;
    const Tensor qh = slice_cols(q, b, e);
    Tensor scores = matmul(qh, transpose(slice_cols(k, b, e)));
    scores = add_column(scores, row_dot(qh, slice_cols(f_keys, b, e)));
    const Tensor weights = masked_softmax(scale(scores, inv_sqrt), mask);
    outs.push_back(add(matmul(weights, slice_cols(v, b, e)),
                       slice_cols(f_values, b, e)));
  }
  return heads == 1 ? outs[0] : concat_cols(outs);
}

Tensor rows_tensor(const std::vector<double>& flat, std::size_t rows,
                   std::size_t cols) {
  return Tensor::matrix(rows, cols,
                        std::vector<double>(flat.begin(),
                                            flat.begin() + rows * cols));
}

void append_values(std::vector<double>& dst, const Tensor& t) {
  dst.insert(dst.end(), t.values().begin(), t.values().end());
}

}  // namespace

// --- config / model ------------------------------------------------------------

void ModelConfig::validate() const {
  if (n_layers == 0 || d_model == 0 || n_heads == 0 || d_ff == 0 ||
      src_vocab == 0 || tgt_vocab == 0 || max_len == 0 || wait_k == 0) {
    throw ConfigError("model extents must all be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) +
                      " is not divisible by n_heads " + std::to_string(n_heads));
  }
  if (src_vocab <= kReservedTokens || tgt_vocab <= kReservedTokens) {
    throw ConfigError("vocabularies must exceed the reserved tokens");
  }
}

std::string_view variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::teacher: return "teacher";
    case ModelVariant::baseline_bi: return "baseline_bi";
    case ModelVariant::baseline_uni: return "baseline_uni";
    case ModelVariant::incremental_ael: return "incremental_ael";
  }
  return "unknown";
}

ModelVariant parse_variant(std::string_view name) {
  for (auto v : {ModelVariant::teacher, ModelVariant::baseline_bi,
                 ModelVariant::baseline_uni, ModelVariant::incremental_ael}) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("unknown model variant '" + std::string(name) + "'");
}

TransformerModel::TransformerModel(const ModelConfig& config,
                                   ModelVariant variant, std::uint64_t seed)
    : config_(config), variant_(variant) {
  config_.validate();
  const std::size_t d = config_.d_model;
  src_embed = Tensor::zeros({config_.src_vocab, d});
  tgt_embed = Tensor::zeros({config_.tgt_vocab, d});
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    encoder.push_back({make_norm(d), make_attention(d), make_norm(d),
                       make_linear(d, config_.d_ff),
                       make_linear(config_.d_ff, d)});
    decoder.push_back({make_norm(d), make_attention(d), make_norm(d),
                       make_attention(d), make_norm(d),
                       make_linear(d, config_.d_ff),
                       make_linear(config_.d_ff, d)});
  }
  encoder_norm = make_norm(d);
  decoder_norm = make_norm(d);
  output = make_linear(d, config_.tgt_vocab);
  if (has_ael()) ael_weight = Tensor::zeros({d, d});

  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& [name, t] : parameters()) {
    if (ends_with(name, ".bias") || ends_with(name, ".gain")) continue;
    for (double& v : t.mutable_values()) v = dist(rng);
  }
  set_trainable(true);
}

TransformerModel TransformerModel::clone() const {
  TransformerModel copy(config_, variant_, 0);
  auto src = parameters();
  auto dst = copy.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto from = src[i].second.values();
    std::copy(from.begin(), from.end(), dst[i].second.mutable_values().begin());
    dst[i].second.set_requires_grad(src[i].second.requires_grad());
  }
  return copy;
}

std::vector<NamedTensor> TransformerModel::parameters() const {
  std::vector<NamedTensor> out;
  out.emplace_back("src_embed", src_embed);
  out.emplace_back("tgt_embed", tgt_embed);
  for (std::size_t l = 0; l < encoder.size(); ++l) {
    const std::string p = "encoder." + std::to_string(l);
    push_norm(out, p + ".norm1", encoder[l].norm1);
    push_attention(out, p + ".self", encoder[l].self);
    push_norm(out, p + ".norm2", encoder[l].norm2);
    push_linear(out, p + ".ff1", encoder[l].ff1);
    push_linear(out, p + ".ff2", encoder[l].ff2);
  }
  push_norm(out, "encoder_norm", encoder_norm);
  for (std::size_t l = 0; l < decoder.size(); ++l) {
    const std::string p = "decoder." + std::to_string(l);
    push_norm(out, p + ".norm1", decoder[l].norm1);
    push_attention(out, p + ".self", decoder[l].self);
    push_norm(out, p + ".norm2", decoder[l].norm2);
    push_attention(out, p + ".cross", decoder[l].cross);
    push_norm(out, p + ".norm3", decoder[l].norm3);
    push_linear(out, p + ".ff1", decoder[l].ff1);
    push_linear(out, p + ".ff2", decoder[l].ff2);
  }
  push_norm(out, "decoder_norm", decoder_norm);
  push_linear(out, "output", output);
  if (has_ael()) out.emplace_back("ael.weight", ael_weight);
  return out;
}

void TransformerModel::set_trainable(bool trainable) {
  for (auto& [name, t] : parameters()) t.set_requires_grad(trainable);
}

void TransformerModel::zero_grad() {
  for (auto& [name, t] : parameters()) t.zero_grad();
}

std::size_t TransformerModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : parameters()) n += t.numel();
  return n;
}

// --- building blocks -----------------------------------------------------------

Tensor positional_encoding(std::size_t positions, std::size_t d_model,
                           std::size_t offset) {
  std::vector<double> pe(positions * d_model);
  for (std::size_t p = 0; p < positions; ++p) {
    const double pos = static_cast<double>(p + offset);
    for (std::size_t i = 0; i < d_model; ++i) {
      const double rate = std::pow(
          10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model));
      pe[p * d_model + i] = (i % 2 == 0) ? std::sin(pos / rate) : std::cos(pos / rate);
    }
  }
  return Tensor::matrix(positions, d_model, std::move(pe));
}

Tensor embed_tokens(const Tensor& table, std::span<const TokenId> ids,
                    std::size_t offset) {
  const std::size_t d = table.cols();
  return add(scale(embedding(table, ids), std::sqrt(static_cast<double>(d))),
             positional_encoding(ids.size(), d, offset));
}

Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v,
              const Mask& mask, std::size_t n_heads) {
  const std::size_t d = q.cols();
  if (k.cols() != d || v.cols() != d || k.rows() != v.rows()) {
    throw DimensionError("attend: q " + shape_string(q.shape()) + ", k " +
                         shape_string(k.shape()) + ", v " +
                         shape_string(v.shape()));
  }
  if (n_heads == 0 || d % n_heads != 0) {
    throw DimensionError("attend: width " + std::to_string(d) +
                         " does not split into " + std::to_string(n_heads) +
                         " heads");
  }
  const std::size_t dk = d / n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Tensor> outs;
  outs.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t b = h * dk, e = b + dk;
    const Tensor scores =
        scale(matmul(slice_cols(q, b, e), transpose(slice_cols(k, b, e))), inv_sqrt);
    outs.push_back(matmul(masked_softmax(scores, mask), slice_cols(v, b, e)));
  }
  return n_heads == 1 ? outs[0] : concat_cols(outs);
}

Tensor multi_head_attention(const AttentionWeights& w, const Tensor& queries,
                            const Tensor& keys, const Tensor& values,
                            const Mask& mask, std::size_t n_heads) {
  const Tensor q = linear(queries, w.query.weight, w.query.bias);
  const Tensor k = linear(keys, w.key.weight, w.key.bias);
  const Tensor v = linear(values, w.value.weight, w.value.bias);
  return linear(attend(q, k, v, mask, n_heads), w.output.weight, w.output.bias);
}

// --- encoders --------------------------------------------------------------------

EncoderOutput encode_bidirectional(const TransformerModel& model,
                                   std::span<const TokenId> src) {
  check_source(model, src);
  return run_encoder(model, src, Mask(1, src.size(), true));
}

EncoderOutput encode_unidirectional(const TransformerModel& model,
                                    std::span<const TokenId> src) {
  check_source(model, src);
  return run_encoder(model, src, Mask::causal(src.size()));
}

std::vector<Tensor> encode_waitk_recompute(const TransformerModel& model,
                                           std::span<const TokenId> src,
                                           const WaitKSchedule& schedule,
                                           std::size_t steps) {
  check_source(model, src);
  if (steps < 1) throw ContractError("recompute needs at least one step");
  if (schedule.src_len() != src.size()) {
    throw ContractError("schedule built for " +
                        std::to_string(schedule.src_len()) +
                        " tokens, source has " + std::to_string(src.size()));
  }
  const std::size_t n = src.size();
  std::map<std::size_t, Tensor> by_prefix;
  std::vector<Tensor> out;
  out.reserve(steps);
  for (std::size_t t = 1; t <= steps; ++t) {
    const std::size_t g = schedule.g(t);
    auto it = by_prefix.find(g);
    if (it == by_prefix.end()) {
      Mask mask(n, n, false);
      for (std::size_t i = 0; i < g; ++i) {
        for (std::size_t j = 0; j < g; ++j) mask.set(i, j, true);
      }
      Tensor z = zero_rows_from(run_encoder(model, src, mask).z, g);
      it = by_prefix.emplace(g, std::move(z)).first;
    }
    out.push_back(it->second);
  }
  return out;
}

UniEncoderState::UniEncoderState(const TransformerModel& model)
    : model_(&model),
      keys_(model.config().n_layers),
      values_(model.config().n_layers) {
  if (!model.unidirectional()) {
    throw StateError("streaming encoder needs a unidirectional model, got " +
                     std::string(variant_name(model.variant())));
  }
}

Tensor UniEncoderState::z() const {
  if (count_ == 0) throw StateError("no source token has been encoded");
  return rows_tensor(z_, count_, model_->config().d_model);
}

Tensor UniEncoderState::embeddings() const {
  if (count_ == 0) throw StateError("no source token has been encoded");
  return rows_tensor(embeddings_, count_, model_->config().d_model);
}

Tensor encode_unidirectional_streaming(const TransformerModel& model,
                                       UniEncoderState& state, TokenId token) {
  if (state.model_ != &model) {
    throw StateError("encoder cache belongs to a different model");
  }
  const auto& cfg = model.config();
  const std::size_t pos = state.count_;
  if (pos >= cfg.max_len) {
    throw LengthError("streaming source exceeds max_len " +
                      std::to_string(cfg.max_len));
  }
  const std::size_t d = cfg.d_model;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    if (state.keys_[l].size() != pos * d || state.values_[l].size() != pos * d) {
      throw StateError("layer " + std::to_string(l) + " cache holds " +
                       std::to_string(state.keys_[l].size() / d) +
                       " rows at position " + std::to_string(pos));
    }
  }
  const TokenId ids[] = {token};
  Tensor x = embed_tokens(model.src_embed, ids, pos);
  append_values(state.embeddings_, x);
  const Mask all(1, pos + 1, true);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const EncoderLayer& layer = model.encoder[l];
    const Tensor h = norm(layer.norm1, x);
    const Tensor q = linear(h, layer.self.query.weight, layer.self.query.bias);
    append_values(state.keys_[l],
                  linear(h, layer.self.key.weight, layer.self.key.bias));
    append_values(state.values_[l],
                  linear(h, layer.self.value.weight, layer.self.value.bias));
    const Tensor a = attend(q, rows_tensor(state.keys_[l], pos + 1, d),
                            rows_tensor(state.values_[l], pos + 1, d), all,
                            cfg.n_heads);
    const Tensor x1 =
        add(x, linear(a, layer.self.output.weight, layer.self.output.bias));
    x = add(x1, feed_forward(layer.ff1, layer.ff2, norm(layer.norm2, x1)));
  }
  Tensor z = norm(model.encoder_norm, x);
  append_values(state.z_, z);
  ++state.count_;
  return z;
}

// --- average embedding layer ----------------------------------------------------

Tensor IncrementalHiddenStates::slice(std::size_t g) const {
  if (g < 1 || g > n) {
    throw ScheduleError("slice g=" + std::to_string(g) + " outside [1, " +
                        std::to_string(n) + "]");
  }
  const std::size_t d = h.shape()[2];
  const auto v = h.values();
  const auto begin = v.begin() + static_cast<std::ptrdiff_t>((g - 1) * n * d);
  return Tensor::matrix(g, d, std::vector<double>(begin, begin + g * d));
}

Tensor ael_summary(const Tensor& embeddings, const Tensor& weight) {
  return matmul(masked_cumulative_mean(embeddings), weight);
}

IncrementalHiddenStates ael_forward(const Tensor& embeddings, const Tensor& z,
                                    const Tensor& weight) {
  if (embeddings.shape() != z.shape()) {
    throw DimensionError("ael_forward: embeddings " +
                         shape_string(embeddings.shape()) + " vs states " +
                         shape_string(z.shape()));
  }
  return {ael_expand(ael_summary(embeddings, weight), z), z.rows()};
}

AelState::AelState(std::size_t d_model) : sum_(d_model, 0.0) {}

void AelState::push(std::span<const double> embedding) {
  if (embedding.size() != sum_.size()) {
    throw DimensionError("AEL embedding of width " +
                         std::to_string(embedding.size()) + ", expected " +
                         std::to_string(sum_.size()));
  }
  for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += embedding[i];
  ++count_;
}

Tensor AelState::mean() const {
  if (count_ == 0) throw StateError("AEL mean of no embeddings");
  const std::size_t d = sum_.size();
  std::vector<double> m(d);
  const double c = static_cast<double>(count_);
  for (std::size_t i = 0; i < d; ++i) m[i] = sum_[i] / c;
  return Tensor::matrix(1, d, std::move(m));
}

Tensor AelState::summary(const Tensor& weight) const {
  return matmul(mean(), weight);
}

// --- decoder ------------------------------------------------------------------------

Tensor decode_batched(const TransformerModel& model,
                      std::span<const TokenId> decoder_input,
                      const CrossSource& source) {
  const auto& cfg = model.config();
  const std::size_t steps = decoder_input.size();
  if (steps == 0) throw ContractError("decoder input is empty");
  const bool per_step = !source.per_step.empty();
  if (per_step && source.per_step.size() != steps) {
    throw DimensionError("per-step memories: " +
                         std::to_string(source.per_step.size()) + " for " +
                         std::to_string(steps) + " rows");
  }
  const std::size_t n = per_step ? source.per_step[0].rows() : source.memory.rows();
  std::vector<std::size_t> visible = source.visible;
  if (visible.empty()) visible.assign(steps, n);
  if (visible.size() != steps) {
    throw DimensionError("visibility list of " + std::to_string(visible.size()) +
                         " for " + std::to_string(steps) + " rows");
  }
  for (std::size_t g : visible) {
    if (g < 1 || g > n) {
      throw ScheduleError("g=" + std::to_string(g) + " outside [1, " +
                          std::to_string(n) + "]");
    }
  }
  const Mask causal = Mask::causal(steps);
  const Mask cross_mask = Mask::prefix(visible, n);
  std::vector<std::size_t> summary_rows(steps);
  for (std::size_t t = 0; t < steps; ++t) summary_rows[t] = visible[t] - 1;

  Tensor x = embed_tokens(model.tgt_embed, decoder_input);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const DecoderLayer& layer = model.decoder[l];
    const bool last = l + 1 == cfg.n_layers;
    const Tensor h = norm(layer.norm1, x);
    x = add(x, multi_head_attention(layer.self, h, h, h, causal, cfg.n_heads));

    const Tensor h2 = norm(layer.norm2, x);
    const auto& cw = layer.cross;
    const Tensor q = linear(h2, cw.query.weight, cw.query.bias);
    Tensor attended;
    if (per_step) {
      std::vector<Tensor> rows;
      rows.reserve(steps);
      const detail::TensorNode* cached_id = nullptr;
      Tensor k, v;
      for (std::size_t t = 0; t < steps; ++t) {
        const Tensor& memory = source.per_step[t];
        if (memory.id() != cached_id) {
          k = linear(memory, cw.key.weight, cw.key.bias);
          v = linear(memory, cw.value.weight, cw.value.bias);
          cached_id = memory.id();
        }
        const std::size_t g[] = {visible[t]};
        rows.push_back(attend(slice_rows(q, t, t + 1), k, v, Mask::prefix(g, n),
                              cfg.n_heads));
      }
      attended = concat_rows(rows);
    } else {
      const Tensor k = linear(source.memory, cw.key.weight, cw.key.bias);
      const Tensor v = linear(source.memory, cw.value.weight, cw.value.bias);
      if (last && source.ael_summary.defined()) {
        const Tensor fk = gather_rows(matmul(source.ael_summary, cw.key.weight),
                                      summary_rows);
        const Tensor fv = gather_rows(
            matmul(source.ael_summary, cw.value.weight), summary_rows);
        attended = attend_ael(q, k, v, fk, fv, cross_mask, cfg.n_heads);
      } else {
        attended = attend(q, k, v, cross_mask, cfg.n_heads);
      }
    }
    x = add(x, linear(attended, cw.output.weight, cw.output.bias));
    x = add(x, feed_forward(layer.ff1, layer.ff2, norm(layer.norm3, x)));
  }
  return linear(norm(model.decoder_norm, x), model.output.weight,
                model.output.bias);
}

DecoderState::DecoderState(const TransformerModel& model)
    : model_(&model),
      self_keys_(model.config().n_layers),
      self_values_(model.config().n_layers),
      cross_keys_(model.config().n_layers),
      cross_values_(model.config().n_layers) {}

Tensor decode_step(const TransformerModel& model, DecoderState& state,
                   TokenId previous, const StepSource& source) {
  if (state.model_ != &model) {
    throw StateError("decoder cache belongs to a different model");
  }
  const auto& cfg = model.config();
  const std::size_t d = cfg.d_model;
  const std::size_t g = source.g;
  if (!source.memory.defined() || g < 1 || g > source.memory.rows()) {
    throw ScheduleError("g=" + std::to_string(g) + " with " +
                        std::to_string(source.memory.defined()
                                           ? source.memory.rows()
                                           : 0) +
                        " source rows available");
  }
  const std::size_t pos = state.position_;
  const TokenId ids[] = {previous};
  Tensor x = embed_tokens(model.tgt_embed, ids, pos);
  const Mask self_mask(1, pos + 1, true);
  const Mask cross_mask(1, g, true);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const DecoderLayer& layer = model.decoder[l];
    const bool last = l + 1 == cfg.n_layers;
    const Tensor h = norm(layer.norm1, x);
    const auto& sw = layer.self;
    const Tensor q = linear(h, sw.query.weight, sw.query.bias);
    append_values(state.self_keys_[l], linear(h, sw.key.weight, sw.key.bias));
    append_values(state.self_values_[l],
                  linear(h, sw.value.weight, sw.value.bias));
    const Tensor a = attend(q, rows_tensor(state.self_keys_[l], pos + 1, d),
                            rows_tensor(state.self_values_[l], pos + 1, d),
                            self_mask, cfg.n_heads);
    x = add(x, linear(a, sw.output.weight, sw.output.bias));

    const Tensor h2 = norm(layer.norm2, x);
    const auto& cw = layer.cross;
    const Tensor q2 = linear(h2, cw.query.weight, cw.query.bias);
    Tensor k, v;
    if (source.append_only) {
      auto& kc = state.cross_keys_[l];
      auto& vc = state.cross_values_[l];
      const std::size_t have = kc.size() / d;
      if (have < g) {
        const Tensor fresh = slice_rows(source.memory, have, g);
        append_values(kc, linear(fresh, cw.key.weight, cw.key.bias));
        append_values(vc, linear(fresh, cw.value.weight, cw.value.bias));
      }
      k = rows_tensor(kc, g, d);
      v = rows_tensor(vc, g, d);
    } else {
      const Tensor memory = slice_rows(source.memory, 0, g);
      k = linear(memory, cw.key.weight, cw.key.bias);
      v = linear(memory, cw.value.weight, cw.value.bias);
    }
    Tensor attended;
    if (last && source.ael_row.defined()) {
      attended = attend_ael(q2, k, v, matmul(source.ael_row, cw.key.weight),
                            matmul(source.ael_row, cw.value.weight), cross_mask,
                            cfg.n_heads);
    } else {
      attended = attend(q2, k, v, cross_mask, cfg.n_heads);
    }
    x = add(x, linear(attended, cw.output.weight, cw.output.bias));
    x = add(x, feed_forward(layer.ff1, layer.ff2, norm(layer.norm3, x)));
  }
  ++state.position_;
  return linear(norm(model.decoder_norm, x), model.output.weight,
                model.output.bias);
}

// --- whole-model passes ----------------------------------------------------------

std::vector<TokenId> decoder_input_for(std::span<const TokenId> target) {
  std::vector<TokenId> in;
  in.reserve(target.size() + 1);
  in.push_back(kBos);
  in.insert(in.end(), target.begin(), target.end());
  return in;
}

std::vector<TokenId> decoder_targets_for(std::span<const TokenId> target) {
  std::vector<TokenId> out(target.begin(), target.end());
  out.push_back(kEos);
  return out;
}

ForwardResult forward_teacher(const TransformerModel& model,
                              std::span<const TokenId> src,
                              std::span<const TokenId> decoder_input) {
  EncoderOutput enc = encode_bidirectional(model, src);
  CrossSource source;
  source.memory = enc.z;
  Tensor logits = decode_batched(model, decoder_input, source);
  return {std::move(logits), std::move(enc)};
}

ForwardResult forward_student(const TransformerModel& model,
                              std::span<const TokenId> src,
                              std::span<const TokenId> decoder_input,
                              const WaitKSchedule& schedule) {
  if (schedule.src_len() != src.size()) {
    throw ContractError("schedule built for " +
                        std::to_string(schedule.src_len()) +
                        " tokens, source has " + std::to_string(src.size()));
  }
  const std::size_t steps = decoder_input.size();
  CrossSource source;
  source.visible = schedule.visible(steps);
  EncoderOutput enc;
  switch (model.variant()) {
    case ModelVariant::incremental_ael:
      enc = encode_unidirectional(model, src);
      source.memory = enc.z;
      source.ael_summary = ael_summary(enc.embeddings, model.ael_weight);
      break;
    case ModelVariant::baseline_uni:
      enc = encode_unidirectional(model, src);
      source.memory = enc.z;
      break;
    case ModelVariant::baseline_bi: {
      source.per_step = encode_waitk_recompute(model, src, schedule, steps);
      enc.z = source.per_step.back();
      enc.embeddings = embed_tokens(model.src_embed, src);
      enc.n = src.size();
      break;
    }
    case ModelVariant::teacher:
      throw ContractError("forward_student called on a teacher model");
  }
  Tensor logits = decode_batched(model, decoder_input, source);
  return {std::move(logits), std::move(enc)};
}

}  // namespace simulst
