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

#include "simulst/streaming.hpp"

#include <algorithm>

#include "json.hpp"
#include "simulst/errors.hpp"

namespace simulst {

std::string DecodeTrace::to_json() const {
  nlohmann::json j;
  j["g"] = g;
  j["src_len"] = src_len;
  j["tgt_len"] = tgt_len;
  j["tokens"] = tokens;
  return j.dump();
}

DecodeTrace DecodeTrace::from_json(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    DecodeTrace t;
    t.g = j.at("g").get<std::vector<std::size_t>>();
    t.src_len = j.at("src_len").get<std::size_t>();
    t.tgt_len = j.at("tgt_len").get<std::size_t>();
    t.tokens = j.at("tokens").get<std::vector<TokenId>>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed trace record: ") + e.what());
  }
}

std::size_t tail_limit(std::size_t src_len) { return 2 * src_len + 5; }

TokenId SourceReader::at(std::size_t index) {
  if (index >= tokens_.size()) {
    throw IndexError("source position " + std::to_string(index) +
                     " not read yet (" + std::to_string(tokens_.size()) +
                     " available)");
  }
  high_water_ = std::max(high_water_, index + 1);
  return tokens_[index];
}

std::span<const TokenId> SourceReader::prefix(std::size_t count) {
  if (count > tokens_.size()) {
    throw IndexError("source prefix of " + std::to_string(count) +
                     " tokens, only " + std::to_string(tokens_.size()) +
                     " available");
  }
  high_water_ = std::max(high_water_, count);
  return std::span<const TokenId>(tokens_).first(count);
}

TokenId argmax_token(std::span<const double> logits) {
  if (logits.empty()) throw ContractError("argmax of empty logits");
  return static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) -
                              logits.begin());
}

// --- streaming decoder -----------------------------------------------------------

StreamingDecoder::StreamingDecoder(const TransformerModel& model, std::size_t k,
                                   std::size_t max_len)
    : model_(&model), k_(k), max_len_(max_len), decoder_(model) {
  if (k == 0) throw ContractError("wait-k needs k >= 1");
  if (model.unidirectional()) uni_.emplace(model);
  if (model.has_ael()) ael_.emplace(model.config().d_model);
}

bool StreamingDecoder::can_write() const {
  if (done_) return false;
  if (source_done_) return true;
  if (model_->variant() == ModelVariant::teacher) return false;
  return reader_.available() >= k_ + written_;
}

TokenId StreamingDecoder::step(std::size_t g) {
  const std::size_t d = model_->config().d_model;
  StepSource source;
  source.g = g;
  switch (model_->variant()) {
    case ModelVariant::baseline_uni:
    case ModelVariant::incremental_ael:
      source.memory = uni_->z();
      if (ael_) {
        source.ael_row = Tensor::matrix(
            1, d,
            std::vector<double>(summaries_.begin() + (g - 1) * d,
                                summaries_.begin() + g * d));
      }
      break;
    case ModelVariant::baseline_bi:
      source.memory = encode_bidirectional(*model_, reader_.prefix(g)).z;
      source.append_only = false;
      break;
    case ModelVariant::teacher:
      if (!offline_memory_.defined()) {
        offline_memory_ =
            encode_bidirectional(*model_, reader_.prefix(reader_.available())).z;
      }
      source.memory = offline_memory_;
      break;
  }
  const Tensor logits = decode_step(*model_, decoder_, previous_, source);
  return argmax_token(logits.values());
}

void StreamingDecoder::emit(std::vector<TokenId>& out) {
  while (can_write()) {
    const std::size_t n = reader_.available();
    std::size_t g = source_done_ ? std::min(k_ + written_, n) : k_ + written_;
    if (model_->variant() == ModelVariant::teacher) g = n;
    const std::size_t limit = max_len_ ? max_len_ : tail_limit(n);
    if (source_done_ && trace_.tgt_len >= limit) {
      done_ = true;
      break;
    }
    const TokenId token = step(g);
    access_.push_back(reader_.high_water());
    ++written_;
    if (token == kEos) {
      done_ = true;
      break;
    }
    trace_.g.push_back(g);
    trace_.tokens.push_back(token);
    ++trace_.tgt_len;
    out.push_back(token);
    previous_ = token;
    if (max_len_ && trace_.tgt_len >= max_len_) done_ = true;
  }
}

std::vector<TokenId> StreamingDecoder::push(TokenId token) {
  if (source_done_) throw StateError("source already finished");
  reader_.append(token);
  std::vector<TokenId> out;
  if (done_) return out;
  const std::size_t i = reader_.available() - 1;
  if (uni_) {
    encode_unidirectional_streaming(*model_, *uni_, reader_.at(i));
    if (ael_) {
      const Tensor e = uni_->embeddings();
      const std::size_t d = model_->config().d_model;
      ael_->push(e.values().subspan(i * d, d));
      const Tensor f = ael_->summary(model_->ael_weight);
      summaries_.insert(summaries_.end(), f.values().begin(), f.values().end());
    }
  } else if (reader_.available() > model_->config().max_len) {
    throw LengthError("streaming source exceeds max_len " +
                      std::to_string(model_->config().max_len));
  }
  emit(out);
  return out;
}

std::vector<TokenId> StreamingDecoder::finish() {
  if (source_done_) throw StateError("source already finished");
  if (reader_.available() == 0) throw ContractError("empty source");
  source_done_ = true;
  trace_.src_len = reader_.available();
  std::vector<TokenId> out;
  emit(out);
  return out;
}

DecodeResult streaming_decode(const TransformerModel& model,
                              std::span<const TokenId> src, std::size_t k,
                              std::size_t max_len) {
  if (src.empty()) throw ContractError("empty source");
  StreamingDecoder dec(model, k, max_len);
  for (TokenId t : src) dec.push(t);
  dec.finish();
  return {dec.trace().tokens, dec.trace()};
}

DecodeResult greedy_decode_batched(const TransformerModel& model,
                                   std::span<const TokenId> src, std::size_t k,
                                   std::size_t max_len) {
  if (src.empty()) throw ContractError("empty source");
  const std::size_t n = src.size();
  const std::size_t limit = max_len ? max_len : tail_limit(n);
  const bool offline = model.variant() == ModelVariant::teacher;
  const WaitKSchedule sched(k, n);
  DecodeResult result;
  result.trace.src_len = n;
  std::vector<TokenId> dec_in = {kBos};
  while (result.tokens.size() < limit) {
    const Tensor logits = offline ? forward_teacher(model, src, dec_in).logits
                                  : forward_student(model, src, dec_in, sched).logits;
    const std::size_t last = dec_in.size() - 1;
    const std::size_t v = logits.cols();
    const TokenId token =
        argmax_token(logits.values().subspan(last * v, v));
    if (token == kEos) break;
    result.trace.g.push_back(offline ? n : sched.g(dec_in.size()));
    result.tokens.push_back(token);
    dec_in.push_back(token);
  }
  result.trace.tokens = result.tokens;
  result.trace.tgt_len = result.tokens.size();
  return result;
}

}  // namespace simulst
