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

#include "simulst/data.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "simulst/errors.hpp"

namespace simulst {

namespace {

const char* const kReservedWords[kReservedTokens] = {"<pad>", "<s>", "</s>",
                                                     "<unk>"};

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

std::string_view task_name(TaskKind kind) {
  return kind == TaskKind::copy ? "copy" : "lagged_map";
}

TaskKind parse_task(std::string_view name) {
  if (name == "copy") return TaskKind::copy;
  if (name == "lagged_map") return TaskKind::lagged_map;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

std::vector<ParallelExample> generate_synthetic(const SyntheticTaskSpec& spec,
                                                std::size_t count) {
  if (count < 1) throw ContractError("generate_synthetic needs count >= 1");
  if (spec.vocab <= kReservedTokens) {
    throw ConfigError("vocabulary of " + std::to_string(spec.vocab) +
                      " leaves no room beside the " +
                      std::to_string(kReservedTokens) + " reserved tokens");
  }
  if (spec.min_len < 1 || spec.min_len > spec.max_len) {
    throw ConfigError("length range [" + std::to_string(spec.min_len) + ", " +
                      std::to_string(spec.max_len) + "] is empty");
  }
  const auto content = static_cast<TokenId>(spec.vocab - kReservedTokens);
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<std::size_t> length(spec.min_len, spec.max_len);
  std::uniform_int_distribution<TokenId> token(0, content - 1);
  std::bernoulli_distribution big_step(0.25);

  std::vector<ParallelExample> out;
  out.reserve(count);
  for (std::size_t e = 0; e < count; ++e) {
    const std::size_t n = length(rng);
    ParallelExample ex;
    ex.src.resize(n);
    TokenId cur = token(rng);
    for (std::size_t i = 0; i < n; ++i) {
      if (spec.walk) {
        if (i > 0) cur = (cur + (big_step(rng) ? 2 : 1)) % content;
      } else {
        cur = token(rng);
      }
      ex.src[i] = static_cast<TokenId>(kReservedTokens) + cur;
    }
    const std::size_t lag = spec.kind == TaskKind::copy ? 0 : spec.lag;
    std::vector<AlignmentLink> links;
    ex.tgt.resize(n);
    for (std::size_t i = 1; i <= n; ++i) {
      const std::size_t j = i + lag;
      ex.tgt[i - 1] = j <= n ? ex.src[j - 1] : kUnk;
      links.emplace_back(i, std::min(j, n));
    }
    ex.alignment = std::move(links);
    out.push_back(std::move(ex));
  }
  return out;
}

// --- vocabulary ----------------------------------------------------------------

Vocabulary::Vocabulary() {
  for (const char* w : kReservedWords) {
    index_.emplace(w, static_cast<TokenId>(words_.size()));
    words_.emplace_back(w);
  }
}

Vocabulary Vocabulary::from_counts(
    const std::map<std::string, std::size_t>& counts) {
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(),
                                                         counts.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  Vocabulary v;
  for (auto& [word, c] : items) {
    if (v.index_.contains(word)) continue;
    v.index_.emplace(word, static_cast<TokenId>(v.words_.size()));
    v.words_.push_back(word);
  }
  return v;
}

Vocabulary Vocabulary::synthetic(std::size_t size) {
  Vocabulary v;
  for (std::size_t i = kReservedTokens; i < size; ++i) {
    std::string w = "w" + std::to_string(i);
    v.index_.emplace(w, static_cast<TokenId>(i));
    v.words_.push_back(std::move(w));
  }
  return v;
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  if (words.size() < kReservedTokens) {
    throw ConfigError("vocabulary lists " + std::to_string(words.size()) +
                      " words, fewer than the reserved tokens");
  }
  Vocabulary v;
  v.words_ = std::move(words);
  v.index_.clear();
  for (std::size_t i = 0; i < v.words_.size(); ++i) {
    if (!v.index_.emplace(v.words_[i], static_cast<TokenId>(i)).second) {
      throw ConfigError("duplicate vocabulary word '" + v.words_[i] + "'");
    }
  }
  return v;
}

TokenId Vocabulary::id(std::string_view word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id >= words_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of " +
                     std::to_string(words_.size()));
  }
  return words_[id];
}

std::vector<std::string> split_words(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string w;
  while (in >> w) out.push_back(std::move(w));
  return out;
}

std::vector<TokenId> Vocabulary::encode(std::string_view line) const {
  std::vector<TokenId> ids;
  for (const auto& w : split_words(line)) ids.push_back(id(w));
  return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId t : ids) {
    if (!out.empty()) out += ' ';
    out += word(t);
  }
  return out;
}

// --- files -----------------------------------------------------------------------

Corpus load_corpus(const std::filesystem::path& src_path,
                   const std::filesystem::path& tgt_path,
                   const Vocabulary* src_vocab, const Vocabulary* tgt_vocab) {
  const auto src_lines = read_lines(src_path);
  const auto tgt_lines = read_lines(tgt_path);
  if (src_lines.size() != tgt_lines.size()) {
    throw IoError("line count mismatch: " + src_path.string() + " has " +
                  std::to_string(src_lines.size()) + ", " + tgt_path.string() +
                  " has " + std::to_string(tgt_lines.size()));
  }
  Corpus corpus;
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> pairs;
  std::map<std::string, std::size_t> src_counts, tgt_counts;
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    auto s = split_words(src_lines[i]);
    auto t = split_words(tgt_lines[i]);
    if (s.empty() || t.empty()) {
      ++corpus.skipped_lines;
      continue;
    }
    for (const auto& w : s) ++src_counts[w];
    for (const auto& w : t) ++tgt_counts[w];
    pairs.emplace_back(std::move(s), std::move(t));
  }
  corpus.src_vocab = src_vocab ? *src_vocab : Vocabulary::from_counts(src_counts);
  corpus.tgt_vocab = tgt_vocab ? *tgt_vocab : Vocabulary::from_counts(tgt_counts);
  for (const auto& [s, t] : pairs) {
    ParallelExample ex;
    for (const auto& w : s) ex.src.push_back(corpus.src_vocab.id(w));
    for (const auto& w : t) ex.tgt.push_back(corpus.tgt_vocab.id(w));
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

void write_alignments(const std::filesystem::path& path,
                      std::span<const ParallelExample> examples) {
  auto out = open_output(path);
  for (const auto& ex : examples) {
    if (ex.alignment) {
      bool first = true;
      for (const auto& [i, j] : *ex.alignment) {
        if (!first) out << ' ';
        out << i << '-' << j;
        first = false;
      }
    }
    out << '\n';
  }
}

void attach_alignments(const std::filesystem::path& path,
                       std::vector<ParallelExample>& examples) {
  const auto lines = read_lines(path);
  if (lines.size() != examples.size()) {
    throw IoError("alignment file " + path.string() + " has " +
                  std::to_string(lines.size()) + " lines for " +
                  std::to_string(examples.size()) + " examples");
  }
  for (std::size_t e = 0; e < lines.size(); ++e) {
    std::vector<AlignmentLink> links;
    for (const auto& item : split_words(lines[e])) {
      const auto dash = item.find('-');
      std::size_t i = 0, j = 0;
      try {
        if (dash == std::string::npos) throw std::invalid_argument(item);
        i = std::stoul(item.substr(0, dash));
        j = std::stoul(item.substr(dash + 1));
      } catch (const std::exception&) {
        throw IoError("malformed alignment '" + item + "' on line " +
                      std::to_string(e + 1) + " of " + path.string());
      }
      if (i < 1 || i > examples[e].tgt.size() || j < 1 ||
          j > examples[e].src.size()) {
        throw IoError("alignment " + item + " out of range on line " +
                      std::to_string(e + 1) + " of " + path.string());
      }
      links.emplace_back(i, j);
    }
    if (links.empty()) {
      examples[e].alignment.reset();
    } else {
      examples[e].alignment = std::move(links);
    }
  }
}

void write_corpus(const std::filesystem::path& dir, const std::string& stem,
                  std::span<const ParallelExample> examples,
                  const Vocabulary& src_vocab, const Vocabulary& tgt_vocab) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto src = open_output(dir / (stem + ".src"));
  auto tgt = open_output(dir / (stem + ".tgt"));
  for (const auto& ex : examples) {
    src << src_vocab.decode(ex.src) << '\n';
    tgt << tgt_vocab.decode(ex.tgt) << '\n';
  }
  write_alignments(dir / (stem + ".align"), examples);
}

// --- batching --------------------------------------------------------------------

std::vector<Batch> make_batches(std::span<const ParallelExample> examples,
                                std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return examples[a].src.size() < examples[b].src.size();
  });
  std::vector<Batch> batches;
  for (std::size_t b = 0; b < order.size(); b += batch_size) {
    Batch batch;
    const std::size_t e = std::min(order.size(), b + batch_size);
    batch.indices.assign(order.begin() + b, order.begin() + e);
    for (std::size_t i : batch.indices) {
      batch.padded_len = std::max(batch.padded_len, examples[i].src.size());
    }
    batches.push_back(std::move(batch));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

std::pair<std::vector<TokenId>, std::vector<std::uint8_t>> pad_sources(
    std::span<const ParallelExample> examples, const Batch& batch) {
  const std::size_t w = batch.padded_len;
  std::vector<TokenId> tokens(batch.indices.size() * w, kPad);
  std::vector<std::uint8_t> keep(batch.indices.size() * w, 0);
  for (std::size_t r = 0; r < batch.indices.size(); ++r) {
    const auto& src = examples[batch.indices[r]].src;
    for (std::size_t c = 0; c < src.size(); ++c) {
      tokens[r * w + c] = src[c];
      keep[r * w + c] = 1;
    }
  }
  return {std::move(tokens), std::move(keep)};
}

}  // namespace simulst
