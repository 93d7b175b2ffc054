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


// Corpus and sentence BLEU over token ids.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

#include "simulst/errors.hpp"
#include "simulst/eval.hpp"

namespace simulst {

namespace {

using NGramCounts = std::map<std::vector<TokenId>, std::size_t>;

NGramCounts ngrams(std::span<const TokenId> tokens, std::size_t order) {
  NGramCounts out;
  if (tokens.size() < order) return out;
  for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
    ++out[std::vector<TokenId>(tokens.begin() + i, tokens.begin() + i + order)];
  }
  return out;
}

std::size_t closest_length(std::size_t cand, std::span<const Sentence> refs) {
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto dist = [cand](std::size_t len) {
      return len > cand ? len - cand : cand - len;
    };
    if (dist(r.size()) < dist(best) ||
        (dist(r.size()) == dist(best) && r.size() < best)) {
      best = r.size();
    }
  }
  return best;
}

double brevity_penalty(std::size_t cand, std::size_t ref) {
  if (cand > ref) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref) / static_cast<double>(cand));
}

}  // namespace

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  for (std::size_t n = 0; n < kBleuOrder; ++n) {
    matches[n] += other.matches[n];
    totals[n] += other.totals[n];
  }
  cand_len += other.cand_len;
  ref_len += other.ref_len;
  return *this;
}

BleuStats bleu_stats(std::span<const TokenId> candidate,
                     std::span<const Sentence> references) {
  if (references.empty()) throw ContractError("BLEU needs at least one reference");
  BleuStats s;
  s.cand_len = candidate.size();
  s.ref_len = closest_length(candidate.size(), references);
  for (std::size_t n = 1; n <= kBleuOrder; ++n) {
    const NGramCounts cand = ngrams(candidate, n);
    NGramCounts clip;
    for (const auto& r : references) {
      for (const auto& [gram, count] : ngrams(r, n)) {
        auto& c = clip[gram];
        c = std::max(c, count);
      }
    }
    for (const auto& [gram, count] : cand) {
      const auto it = clip.find(gram);
      s.matches[n - 1] += std::min(count, it == clip.end() ? 0 : it->second);
      s.totals[n - 1] += count;
    }
  }
  return s;
}

double bleu_from_stats(const BleuStats& stats) {
  if (stats.cand_len == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < kBleuOrder; ++n) {
    if (stats.matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(stats.matches[n]) /
                        static_cast<double>(stats.totals[n]));
  }
  return 100.0 * brevity_penalty(stats.cand_len, stats.ref_len) *
         std::exp(log_sum / static_cast<double>(kBleuOrder));
}

double corpus_bleu(std::span<const Sentence> candidates,
                   std::span<const std::vector<Sentence>> references) {
  if (candidates.empty()) throw ContractError("corpus BLEU of an empty set");
  if (candidates.size() != references.size()) {
    throw ContractError("corpus BLEU: " + std::to_string(candidates.size()) +
                        " candidates vs " + std::to_string(references.size()) +
                        " reference sets");
  }
  BleuStats total;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    total += bleu_stats(candidates[i], references[i]);
  }
  return bleu_from_stats(total);
}

double sentence_bleu(std::span<const TokenId> candidate,
                     std::span<const Sentence> references) {
  const BleuStats s = bleu_stats(candidate, references);
  if (s.cand_len == 0 || s.matches[0] == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < kBleuOrder; ++n) {
    const double p = s.matches[n] == 0
                         ? kBleuEpsilon
                         : static_cast<double>(s.matches[n]) /
                               static_cast<double>(s.totals[n]);
    log_sum += std::log(p);
  }
  return 100.0 * brevity_penalty(s.cand_len, s.ref_len) *
         std::exp(log_sum / static_cast<double>(kBleuOrder));
}

}  // namespace simulst
