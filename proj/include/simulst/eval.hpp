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

// Quality and latency measurement: BLEU, Average Lagging aggregation,
// Present/Absent 1-gram accuracy, encoder-state distance and the
// train-k x test-k BLEU matrix.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simulst/data.hpp"
#include "simulst/transformer.hpp"

namespace simulst {

using Sentence = std::vector<TokenId>;

// --- BLEU ------------------------------------------------------------------------

inline constexpr std::size_t kBleuOrder = 4;
inline constexpr double kBleuEpsilon = 1e-9;

struct BleuStats {
  std::array<std::size_t, kBleuOrder> matches{};  // clipped n-gram matches
  std::array<std::size_t, kBleuOrder> totals{};   // candidate n-grams
  std::size_t cand_len = 0;
  std::size_t ref_len = 0;  // closest reference length, ties to the shorter

  BleuStats& operator+=(const BleuStats& other);
};

// Counts for one candidate against its references (clip = max count over
// references).
BleuStats bleu_stats(std::span<const TokenId> candidate,
                     std::span<const Sentence> references);

// Geometric mean of the four raw precisions times the brevity penalty, on a
// 0..100 scale. Any zero precision gives 0.
double bleu_from_stats(const BleuStats& stats);

// Corpus BLEU over parallel lists; references[i] holds every reference of
// candidate i.
double corpus_bleu(std::span<const Sentence> candidates,
                   std::span<const std::vector<Sentence>> references);

// Sentence BLEU where zero precisions of order >= 2 are replaced by 1e-9.
double sentence_bleu(std::span<const TokenId> candidate,
                     std::span<const Sentence> references);

// --- Present / Absent analysis --------------------------------------------------

struct PresentAbsent {
  Sentence present;
  Sentence absent;
};

// Generated token i (1-based) is Present iff its aligned source j satisfies
// j <= min(i + k - 1, n). j is the largest source index linked to i; positions
// without a link (including those past the reference length) use j = n.
// Returns nullopt when the example has no alignment.
std::optional<PresentAbsent> present_absent_split(const ParallelExample& example,
                                                  std::span<const TokenId> generated,
                                                  std::size_t k);

struct UnigramCounts {
  std::size_t matched = 0;  // clipped against the reference
  std::size_t total = 0;
};

UnigramCounts unigram_counts(std::span<const TokenId> tokens,
                             std::span<const TokenId> reference);

// Clipped unigram precision; nullopt for an empty set.
std::optional<double> one_gram_score(std::span<const TokenId> tokens,
                                     std::span<const TokenId> reference);

// --- model evaluation ---------------------------------------------------------

struct EvalReport {
  std::size_t sentences = 0;
  double corpus_bleu = 0.0;
  double mean_al = 0.0;
  std::size_t truncated = 0;  // traces that never read the whole source
  std::optional<double> absent_1gram;
  std::optional<double> present_1gram;
  std::size_t absent_tokens = 0;
  std::size_t present_tokens = 0;
  std::optional<double> mean_hidden_l2;
  double decode_secs = 0.0;  // wall time; not written to the CSV
};

// Header and row of the report CSV. Optional fields print as NA.
std::string eval_csv_header();
std::string eval_csv_row(const EvalReport& report);

struct EvalOptions {
  std::size_t k = 3;
  const TransformerModel* teacher = nullptr;  // enables mean_hidden_l2
  std::ostream* traces = nullptr;             // JSON lines, one per sentence
  std::vector<Sentence>* outputs = nullptr;   // receives the hypotheses
};

// Streams every example through the wait-k decoder and aggregates BLEU, AL
// and, when alignments exist, Present/Absent 1-gram accuracy.
EvalReport evaluate_model(const TransformerModel& model,
                          std::span<const ParallelExample> dataset,
                          const EvalOptions& options);

// Encoder states the L2 term compares: the unidirectional encoding for
// incremental students, the bidirectional one otherwise.
Tensor distillation_states(const TransformerModel& model,
                           std::span<const TokenId> src);

// Mean over sentences of the L2 distance between the two models' states.
double hidden_distance_stats(const TransformerModel& student,
                             const TransformerModel& teacher,
                             std::span<const ParallelExample> dataset);

struct KMatrix {
  std::vector<std::size_t> train_k;
  std::vector<std::size_t> test_k;
  std::vector<std::vector<double>> bleu;  // [train][test]

  std::string to_csv() const;
};

struct TrainedAtK {
  std::size_t k;
  const TransformerModel* model;
};

KMatrix k_matrix(std::span<const TrainedAtK> models,
                 std::span<const std::size_t> test_k,
                 std::span<const ParallelExample> dataset);

}  // namespace simulst
