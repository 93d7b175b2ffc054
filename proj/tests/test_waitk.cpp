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

#include <random>

#include "doctest.h"
#include "simulst/errors.hpp"
#include "simulst/latency.hpp"
#include "simulst/schedule.hpp"
#include "simulst/streaming.hpp"

using namespace simulst;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.n_layers = 2;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ff = 16;
  c.src_vocab = 10;
  c.tgt_vocab = 10;
  c.max_len = 40;
  return c;
}

// Pushes the EOS logit far down so the decoder always runs to its limit.
void suppress_eos(TransformerModel& model) {
  model.output.bias.mutable_values()[kEos] = -1e3;
}

std::vector<TokenId> random_tokens(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<TokenId> dist(kReservedTokens, 9);
  std::vector<TokenId> out(n);
  for (auto& t : out) t = dist(rng);
  return out;
}

DecodeTrace diagonal_trace(std::size_t k, std::size_t n) {
  DecodeTrace t;
  t.src_len = n;
  t.tgt_len = n;
  for (std::size_t i = 1; i <= n; ++i) t.g.push_back(std::min(k + i - 1, n));
  t.tokens.assign(n, 5);
  return t;
}

}  // namespace

TEST_CASE("g(t) arithmetic") {
  CHECK(WaitKSchedule(3, 10).g(1) == 3);
  CHECK(WaitKSchedule(9, 6).g(5) == 6);
  for (std::size_t t = 1; t <= 50; ++t) CHECK(WaitKSchedule(1, 1000).g(t) == t);
  CHECK_THROWS_AS(WaitKSchedule(3, 10).g(0), ContractError);
  CHECK_THROWS_AS(WaitKSchedule(0, 10), ContractError);
  WaitKSchedule s(4, 9);
  for (std::size_t t = 1; t < 20; ++t) {
    CHECK(s.g(t) <= s.g(t + 1));
    CHECK(s.g(t) <= 9);
  }
}

TEST_CASE("mask construction") {
  WaitKMasks wait_all = build_masks(WaitKSchedule(7, 4), 5);
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(wait_all.cross.keep(t, j));
  }
  WaitKMasks m = build_masks(WaitKSchedule(2, 4), 4);
  const std::size_t expected[] = {2, 3, 4, 4};
  for (std::size_t t = 0; t < 4; ++t) {
    std::size_t visible = 0;
    for (std::size_t j = 0; j < 4; ++j) visible += m.cross.keep(t, j) ? 1 : 0;
    CHECK(visible == expected[t]);
  }
  // Brute-force construction of both masks.
  for (std::size_t k = 1; k <= 6; ++k) {
    for (std::size_t n = 1; n <= 7; ++n) {
      const std::size_t steps = 9;
      WaitKMasks got = build_masks(WaitKSchedule(k, n), steps);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) CHECK(got.encoder.keep(i, j) == (j <= i));
      }
      for (std::size_t t = 1; t <= steps; ++t) {
        for (std::size_t j = 1; j <= n; ++j) {
          CHECK(got.cross.keep(t - 1, j - 1) == (j <= std::min(k + t - 1, n)));
        }
      }
    }
  }
  CHECK_THROWS_AS(build_masks(WaitKSchedule(1, 3), 0), ContractError);
}

TEST_CASE("average lagging worked examples") {
  DecodeTrace a = diagonal_trace(1, 3);
  CHECK(average_lagging(a).al == 1.0);
  CHECK(average_lagging(a).tau == 3);

  DecodeTrace b;
  b.src_len = 4;
  b.tgt_len = 4;
  b.g = {2, 3, 4, 4};
  Lagging lb = average_lagging(b);
  CHECK(lb.tau == 3);
  CHECK(lb.al == 2.0);
  CHECK_FALSE(lb.truncated);

  for (std::size_t n : {1u, 5u, 12u}) {
    DecodeTrace off;
    off.src_len = n;
    off.tgt_len = n + 2;
    off.g.assign(n + 2, n);
    CHECK(average_lagging(off).al == static_cast<double>(n));
    CHECK(average_lagging(off).tau == 1);
  }

  DecodeTrace cut;
  cut.src_len = 6;
  cut.tgt_len = 2;
  cut.g = {2, 3};
  Lagging lc = average_lagging(cut);
  CHECK(lc.truncated);
  CHECK(lc.tau == 2);
  // (2 - 0) + (3 - 1 * 6/2) over 2.
  CHECK(lc.al == doctest::Approx(1.0));

  DecodeTrace empty;
  empty.src_len = 3;
  CHECK(average_lagging(empty).truncated);
  CHECK(average_lagging(empty).al == 0.0);
}

TEST_CASE("average lagging of exact wait-k traces") {
  for (std::size_t k : {1u, 3u, 5u, 7u, 9u}) {
    for (std::size_t n = 10; n <= 20; ++n) {
      CHECK(average_lagging(diagonal_trace(k, n)).al ==
            doctest::Approx(static_cast<double>(k)).epsilon(1e-12));
    }
  }
  for (std::size_t n = 4; n <= 20; ++n) {
    double prev = 0.0;
    for (std::size_t k = 1; k <= n + 2; ++k) {
      const double al = average_lagging(diagonal_trace(k, n)).al;
      CHECK(al >= prev);
      prev = al;
    }
  }
}

TEST_CASE("trace json round trip") {
  DecodeTrace t = diagonal_trace(2, 4);
  const std::string line = t.to_json();
  CHECK(line.find("\"g\":[2,3,4,4]") != std::string::npos);
  DecodeTrace back = DecodeTrace::from_json(line);
  CHECK(back.g == t.g);
  CHECK(back.tokens == t.tokens);
  CHECK(back.src_len == 4);
  CHECK(back.tgt_len == 4);
  CHECK_THROWS_AS(DecodeTrace::from_json("{\"g\": 1}"), IoError);
}

TEST_CASE("streaming schedule and tail policy") {
  TransformerModel model(tiny_config(), ModelVariant::incremental_ael, 1);
  suppress_eos(model);
  std::vector<TokenId> src = {4, 5, 6, 7};
  DecodeResult r = streaming_decode(model, src, 2, 5);
  CHECK(r.trace.g == std::vector<std::size_t>{2, 3, 4, 4, 4});
  CHECK(r.tokens.size() == 5);

  // Without an explicit cap the tail stops at 2|x| + 5.
  DecodeResult tail = streaming_decode(model, src, 2);
  CHECK(tail.tokens.size() == tail_limit(4));

  // Source of length 1 behaves as a full-sentence decode.
  std::vector<TokenId> one = {6};
  DecodeResult r1 = streaming_decode(model, one, 3, 4);
  CHECK(r1.trace.g == std::vector<std::size_t>{1, 1, 1, 1});

  StreamingDecoder dec(model, 2, 0);
  CHECK(dec.push(4).empty());
  CHECK(dec.push(5).size() == 1);  // first write after two reads
  CHECK(dec.push(6).size() == 1);
  dec.finish();
  CHECK_THROWS_AS(dec.push(7), StateError);
  CHECK_THROWS_AS(streaming_decode(model, std::vector<TokenId>{}, 2), ContractError);
  StreamingDecoder empty(model, 2, 0);
  CHECK_THROWS_AS(empty.finish(), ContractError);
}

TEST_CASE("offline decoding waits for the whole source") {
  TransformerModel teacher(tiny_config(), ModelVariant::teacher, 2);
  suppress_eos(teacher);
  StreamingDecoder dec(teacher, 1, 6);
  for (TokenId t : {4, 5, 6}) CHECK(dec.push(t).empty());
  CHECK(dec.finish().size() == 6);
  CHECK(average_lagging(dec.trace()).al == 3.0);
}

TEST_CASE("streaming decode equals batched greedy decode") {
  std::mt19937_64 rng(7);
  for (ModelVariant variant :
       {ModelVariant::incremental_ael, ModelVariant::baseline_uni,
        ModelVariant::baseline_bi, ModelVariant::teacher}) {
    for (int seed = 0; seed < 8; ++seed) {
      TransformerModel model(tiny_config(), variant, 100 + seed);
      if (model.has_ael()) {
        for (double& v : model.ael_weight.mutable_values()) {
          v = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
        }
      }
      for (std::size_t k : {1u, 3u, 5u}) {
        auto src = random_tokens(rng, 1 + rng() % 16);
        DecodeResult s = streaming_decode(model, src, k);
        DecodeResult b = greedy_decode_batched(model, src, k);
        CHECK(s.tokens == b.tokens);
        CHECK(s.trace.g == b.trace.g);
      }
    }
  }
}

TEST_CASE("streaming never reads past g(t)") {
  std::mt19937_64 rng(9);
  for (ModelVariant variant :
       {ModelVariant::incremental_ael, ModelVariant::baseline_bi}) {
    TransformerModel model(tiny_config(), variant, 3);
    suppress_eos(model);
    for (std::size_t k : {1u, 2u, 4u}) {
      auto src = random_tokens(rng, 9);
      StreamingDecoder dec(model, k, 0);
      for (TokenId t : src) dec.push(t);
      dec.finish();
      const auto& g = dec.trace().g;
      const auto& access = dec.access_log();
      REQUIRE(access.size() >= g.size());
      for (std::size_t t = 0; t < g.size(); ++t) {
        CHECK(access[t] <= g[t]);
        CHECK(g[t] == std::min(k + t, src.size()));
      }
    }
  }
}

TEST_CASE("source reader bounds") {
  SourceReader r;
  r.append(4);
  CHECK(r.high_water() == 0);
  CHECK(r.at(0) == 4);
  CHECK(r.high_water() == 1);
  CHECK_THROWS_AS(r.at(1), IndexError);
  CHECK_THROWS_AS(r.prefix(2), IndexError);
}
