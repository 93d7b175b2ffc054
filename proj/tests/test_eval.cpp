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


#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "simulst/errors.hpp"
#include "simulst/eval.hpp"
#include "simulst/streaming.hpp"

using namespace simulst;

namespace {

// Words are mapped onto ids so the examples read naturally.
struct Words {
  std::map<std::string, TokenId> ids;
  Sentence operator()(const std::string& line) {
    Sentence out;
    std::istringstream in(line);
    std::string w;
    while (in >> w) {
      auto [it, added] = ids.emplace(w, static_cast<TokenId>(ids.size() + 4));
      out.push_back(it->second);
    }
    return out;
  }
};

// Straightforward quadruple-loop BLEU used as an oracle.
double naive_bleu(const std::vector<Sentence>& cands,
                  const std::vector<Sentence>& refs) {
  double m[4] = {0, 0, 0, 0}, t[4] = {0, 0, 0, 0};
  double c = 0, r = 0;
  for (std::size_t s = 0; s < cands.size(); ++s) {
    const Sentence& a = cands[s];
    const Sentence& b = refs[s];
    c += static_cast<double>(a.size());
    r += static_cast<double>(b.size());
    for (std::size_t n = 1; n <= 4; ++n) {
      if (a.size() < n) continue;
      std::vector<bool> used(b.size() >= n ? b.size() - n + 1 : 0, false);
      for (std::size_t i = 0; i + n <= a.size(); ++i) {
        t[n - 1] += 1;
        for (std::size_t j = 0; j + n <= b.size(); ++j) {
          if (used[j]) continue;
          bool eq = true;
          for (std::size_t q = 0; q < n; ++q) eq = eq && a[i + q] == b[j + q];
          if (eq) {
            used[j] = true;
            m[n - 1] += 1;
            break;
          }
        }
      }
    }
  }
  if (c == 0) return 0.0;
  double lp = 0;
  for (int n = 0; n < 4; ++n) {
    if (m[n] == 0) return 0.0;
    lp += std::log(m[n] / t[n]) / 4.0;
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return 100.0 * bp * std::exp(lp);
}

TransformerModel tiny_model(ModelVariant variant, std::uint64_t seed) {
  ModelConfig c;
  c.n_layers = 1;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ff = 16;
  c.src_vocab = 12;
  c.tgt_vocab = 12;
  c.max_len = 40;
  return TransformerModel(c, variant, seed);
}

}  // namespace

TEST_CASE("bleu worked examples") {
  Words w;
  const Sentence ref = w("the cat sat on the mat");
  const std::vector<Sentence> refs = {ref};
  CHECK(sentence_bleu(ref, refs) == doctest::Approx(100.0));
  const std::vector<Sentence> c1 = {ref};
  const std::vector<std::vector<Sentence>> r1 = {refs};
  CHECK(corpus_bleu(c1, r1) == doctest::Approx(100.0));

  const Sentence short_cand = w("the cat sat");
  const std::vector<Sentence> longer = {w("the cat sat down")};
  CHECK(sentence_bleu(short_cand, longer) == doctest::Approx(0.4029).epsilon(1e-3));
  const std::vector<Sentence> c2 = {short_cand};
  const std::vector<std::vector<Sentence>> r2 = {longer};
  CHECK(corpus_bleu(c2, r2) == 0.0);

  CHECK(sentence_bleu(w("dog dog"), refs) == 0.0);
  CHECK(sentence_bleu(Sentence{}, refs) == 0.0);
  const std::vector<Sentence> none;
  const std::vector<std::vector<Sentence>> no_refs;
  CHECK_THROWS_AS(corpus_bleu(none, no_refs), ContractError);
}

TEST_CASE("bleu clipping and reference length") {
  Words w;
  const std::vector<Sentence> refs = {w("a b c d"), w("a b c d e f")};
  BleuStats s = bleu_stats(w("a a a a a"), refs);
  CHECK(s.matches[0] == 1);
  CHECK(s.totals[0] == 5);
  CHECK(s.ref_len == 4);  // 4 and 6 are equally close; the shorter wins
  CHECK(bleu_stats(w("a b c d e f g"), refs).ref_len == 6);
}

TEST_CASE("corpus bleu matches a naive oracle") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<TokenId> tok(4, 7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Sentence> cands, refs;
    std::vector<std::vector<Sentence>> ref_sets;
    const std::size_t count = 1 + rng() % 5;
    for (std::size_t s = 0; s < count; ++s) {
      Sentence a(3 + rng() % 8), b(3 + rng() % 8);
      for (auto& t : a) t = tok(rng);
      for (auto& t : b) t = tok(rng);
      cands.push_back(a);
      refs.push_back(b);
      ref_sets.push_back({b});
    }
    CHECK(corpus_bleu(cands, ref_sets) ==
          doctest::Approx(naive_bleu(cands, refs)).epsilon(1e-12));
  }
}

TEST_CASE("present and absent split") {
  ParallelExample ex;
  ex.src = {4, 5, 6, 7, 8};
  ex.tgt = {6, 7, 8, 3, 3};
  ex.alignment = std::vector<AlignmentLink>{{1, 3}, {2, 4}, {3, 5}, {4, 5}, {5, 5}};
  const Sentence gen = {6, 7, 9, 3, 3, 3};
  auto k1 = present_absent_split(ex, gen, 1);
  REQUIRE(k1);
  // i=5 has j=5 <= 5; the extra sixth token falls back to j = n.
  CHECK(k1->present == Sentence{3, 3});
  CHECK(k1->absent == Sentence{6, 7, 9, 3});
  auto k3 = present_absent_split(ex, gen, 3);
  CHECK(k3->absent.empty());
  CHECK(k3->present.size() == gen.size());

  ParallelExample bare = ex;
  bare.alignment.reset();
  CHECK_FALSE(present_absent_split(bare, gen, 1));

  CHECK(*one_gram_score(Sentence{6, 7, 9, 3}, ex.tgt) == doctest::Approx(0.75));
  CHECK(*one_gram_score(Sentence{3, 3, 3}, ex.tgt) == doctest::Approx(2.0 / 3.0));
  CHECK_FALSE(one_gram_score(Sentence{}, ex.tgt));
}

TEST_CASE("evaluation report and traces") {
  SyntheticTaskSpec spec;
  spec.kind = TaskKind::lagged_map;
  spec.vocab = 12;
  spec.lag = 2;
  spec.seed = 4;
  const auto data = generate_synthetic(spec, 6);
  TransformerModel model = tiny_model(ModelVariant::incremental_ael, 5);
  TransformerModel teacher = tiny_model(ModelVariant::teacher, 6);
  std::ostringstream traces;
  std::vector<Sentence> outputs;
  EvalOptions opt;
  opt.k = 2;
  opt.teacher = &teacher;
  opt.traces = &traces;
  opt.outputs = &outputs;
  const EvalReport a = evaluate_model(model, data, opt);
  CHECK(a.sentences == 6);
  CHECK(outputs.size() == 6);
  CHECK(a.mean_hidden_l2);
  CHECK(*a.mean_hidden_l2 > 0.0);
  CHECK(a.absent_tokens + a.present_tokens ==
        [&] { std::size_t s = 0; for (auto& o : outputs) s += o.size(); return s; }());

  // Every trace line parses and agrees with the hypothesis.
  std::istringstream in(traces.str());
  std::string line;
  std::size_t i = 0;
  while (std::getline(in, line)) {
    const DecodeTrace t = DecodeTrace::from_json(line);
    CHECK(t.tokens == outputs[i]);
    CHECK(t.src_len == data[i].src.size());
    ++i;
  }
  CHECK(i == 6);

  opt.traces = nullptr;
  opt.outputs = nullptr;
  const EvalReport b = evaluate_model(model, data, opt);
  CHECK(eval_csv_row(a) == eval_csv_row(b));
  CHECK(eval_csv_header().rfind("sentences,corpus_bleu,mean_al", 0) == 0);

  ParallelExample no_align = data[0];
  no_align.alignment.reset();
  const std::vector<ParallelExample> plain = {no_align};
  const EvalReport c = evaluate_model(model, plain, EvalOptions{});
  CHECK_FALSE(c.absent_1gram);
  CHECK(eval_csv_row(c).find("NA") != std::string::npos);
}

TEST_CASE("hidden distance of a model with itself is zero") {
  SyntheticTaskSpec spec;
  spec.vocab = 12;
  const auto data = generate_synthetic(spec, 4);
  TransformerModel teacher = tiny_model(ModelVariant::teacher, 8);
  CHECK(hidden_distance_stats(teacher, teacher, data) == 0.0);
  TransformerModel uni = tiny_model(ModelVariant::baseline_uni, 8);
  CHECK(hidden_distance_stats(uni, uni, data) == 0.0);
  CHECK(hidden_distance_stats(uni, teacher, data) > 0.0);
}

TEST_CASE("k matrix layout") {
  SyntheticTaskSpec spec;
  spec.vocab = 12;
  const auto data = generate_synthetic(spec, 3);
  TransformerModel m1 = tiny_model(ModelVariant::baseline_uni, 1);
  TransformerModel m3 = tiny_model(ModelVariant::baseline_uni, 3);
  const std::vector<TrainedAtK> models = {{1, &m1}, {3, &m3}};
  const std::vector<std::size_t> ks = {1, 3, 5};
  const KMatrix m = k_matrix(models, ks, data);
  REQUIRE(m.bleu.size() == 2);
  CHECK(m.bleu[0].size() == 3);
  const std::string csv = m.to_csv();
  CHECK(csv.rfind("train_k,test_1,test_3,test_5\n1,", 0) == 0);
  for (const auto& row : m.bleu) {
    for (double b : row) CHECK((b >= 0.0 && b <= 100.0));
  }
}
