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


#include "simulst/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include "simulst/errors.hpp"
#include "simulst/latency.hpp"
#include "simulst/streaming.hpp"

namespace simulst {

namespace {

std::string format_optional(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", *v);
  return buf;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::optional<double> ratio(const UnigramCounts& c) {
  if (c.total == 0) return std::nullopt;
  return static_cast<double>(c.matched) / static_cast<double>(c.total);
}

}  // namespace

// --- Present / Absent --------------------------------------------------------------

std::optional<PresentAbsent> present_absent_split(const ParallelExample& example,
                                                  std::span<const TokenId> generated,
                                                  std::size_t k) {
  if (!example.alignment) return std::nullopt;
  if (k == 0) throw ContractError("wait-k needs k >= 1");
  const std::size_t n = example.src.size();
  std::map<std::size_t, std::size_t> aligned;  // target position -> max source
  for (const auto& [i, j] : *example.alignment) {
    auto& slot = aligned[i];
    slot = std::max(slot, j);
  }
  PresentAbsent out;
  for (std::size_t i = 1; i <= generated.size(); ++i) {
    const auto it = aligned.find(i);
    const std::size_t j = it == aligned.end() ? n : it->second;
    if (j <= std::min(i + k - 1, n)) {
      out.present.push_back(generated[i - 1]);
    } else {
      out.absent.push_back(generated[i - 1]);
    }
  }
  return out;
}

UnigramCounts unigram_counts(std::span<const TokenId> tokens,
                             std::span<const TokenId> reference) {
  std::map<TokenId, std::size_t> budget;
  for (TokenId t : reference) ++budget[t];
  std::map<TokenId, std::size_t> seen;
  for (TokenId t : tokens) ++seen[t];
  UnigramCounts c;
  c.total = tokens.size();
  for (const auto& [t, count] : seen) {
    const auto it = budget.find(t);
    c.matched += std::min(count, it == budget.end() ? 0 : it->second);
  }
  return c;
}

std::optional<double> one_gram_score(std::span<const TokenId> tokens,
                                     std::span<const TokenId> reference) {
  return ratio(unigram_counts(tokens, reference));
}

// --- reports -------------------------------------------------------------------------

std::string eval_csv_header() {
  return "sentences,corpus_bleu,mean_al,truncated,absent_1gram,absent_tokens,"
         "present_1gram,present_tokens,mean_hidden_l2";
}

std::string eval_csv_row(const EvalReport& r) {
  std::ostringstream out;
  out << r.sentences << ',' << format_double(r.corpus_bleu) << ','
      << format_double(r.mean_al) << ',' << r.truncated << ','
      << format_optional(r.absent_1gram) << ',' << r.absent_tokens << ','
      << format_optional(r.present_1gram) << ',' << r.present_tokens << ','
      << format_optional(r.mean_hidden_l2);
  return out.str();
}

Tensor distillation_states(const TransformerModel& model,
                           std::span<const TokenId> src) {
  if (model.unidirectional()) return encode_unidirectional(model, src).z;
  return encode_bidirectional(model, src).z;
}

double hidden_distance_stats(const TransformerModel& student,
                             const TransformerModel& teacher,
                             std::span<const ParallelExample> dataset) {
  if (dataset.empty()) throw ContractError("hidden distance over an empty set");
  if (student.config().d_model != teacher.config().d_model) {
    throw DimensionError("models differ in d_model");
  }
  double sum = 0.0;
  for (const auto& ex : dataset) {
    sum += l2_distance_loss(distillation_states(student, ex.src),
                            distillation_states(teacher, ex.src))
               .item();
  }
  return sum / static_cast<double>(dataset.size());
}

EvalReport evaluate_model(const TransformerModel& model,
                          std::span<const ParallelExample> dataset,
                          const EvalOptions& options) {
  if (dataset.empty()) throw ContractError("evaluation set is empty");
  if (options.k == 0) throw ContractError("wait-k needs k >= 1");
  EvalReport report;
  report.sentences = dataset.size();
  std::vector<Sentence> hyps;
  std::vector<std::vector<Sentence>> refs;
  UnigramCounts absent, present;
  double al_sum = 0.0;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& ex : dataset) {
    DecodeResult r = streaming_decode(model, ex.src, options.k);
    const Lagging lag = average_lagging(r.trace);
    al_sum += lag.al;
    if (lag.truncated) ++report.truncated;
    if (options.traces) *options.traces << r.trace.to_json() << '\n';
    if (auto split = present_absent_split(ex, r.tokens, options.k)) {
      const UnigramCounts a = unigram_counts(split->absent, ex.tgt);
      const UnigramCounts p = unigram_counts(split->present, ex.tgt);
      absent.matched += a.matched;
      absent.total += a.total;
      present.matched += p.matched;
      present.total += p.total;
    }
    hyps.push_back(std::move(r.tokens));
    refs.push_back({ex.tgt});
  }
  report.decode_secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.corpus_bleu = corpus_bleu(hyps, refs);
  report.mean_al = al_sum / static_cast<double>(dataset.size());
  report.absent_1gram = ratio(absent);
  report.present_1gram = ratio(present);
  report.absent_tokens = absent.total;
  report.present_tokens = present.total;
  if (options.teacher) {
    report.mean_hidden_l2 = hidden_distance_stats(model, *options.teacher, dataset);
  }
  if (options.outputs) *options.outputs = std::move(hyps);
  return report;
}

// --- k matrix ------------------------------------------------------------------------

std::string KMatrix::to_csv() const {
  std::ostringstream out;
  out << "train_k";
  for (std::size_t k : test_k) out << ",test_" << k;
  out << '\n';
  for (std::size_t r = 0; r < train_k.size(); ++r) {
    out << train_k[r];
    for (double b : bleu[r]) out << ',' << format_double(b);
    out << '\n';
  }
  return out.str();
}

KMatrix k_matrix(std::span<const TrainedAtK> models,
                 std::span<const std::size_t> test_k,
                 std::span<const ParallelExample> dataset) {
  if (models.empty() || test_k.empty()) throw ContractError("empty k matrix");
  KMatrix m;
  m.test_k.assign(test_k.begin(), test_k.end());
  for (const auto& entry : models) {
    if (!entry.model) throw ContractError("null model in k matrix");
    m.train_k.push_back(entry.k);
    std::vector<double> row;
    for (std::size_t k : test_k) {
      EvalOptions opt;
      opt.k = k;
      row.push_back(evaluate_model(*entry.model, dataset, opt).corpus_bleu);
    }
    m.bleu.push_back(std::move(row));
  }
  return m;
}

}  // namespace simulst
