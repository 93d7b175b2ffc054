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

#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "simulst/data.hpp"
#include "simulst/errors.hpp"

using namespace simulst;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "simulst_test_data";
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

}  // namespace

TEST_CASE("copy task") {
  SyntheticTaskSpec spec;
  spec.kind = TaskKind::copy;
  spec.min_len = 3;
  spec.max_len = 3;
  auto ex = generate_synthetic(spec, 5);
  REQUIRE(ex.size() == 5);
  for (const auto& e : ex) {
    CHECK(e.src.size() == 3);
    CHECK(e.tgt == e.src);
    REQUIRE(e.alignment.has_value());
    CHECK(*e.alignment ==
          std::vector<AlignmentLink>{{1, 1}, {2, 2}, {3, 3}});
    for (TokenId t : e.src) CHECK(t >= kReservedTokens);
  }
}

TEST_CASE("lagged map task") {
  SyntheticTaskSpec spec;
  spec.kind = TaskKind::lagged_map;
  spec.lag = 2;
  spec.min_len = 4;
  spec.max_len = 4;
  for (bool walk : {false, true}) {
    spec.walk = walk;
    auto ex = generate_synthetic(spec, 20);
    for (const auto& e : ex) {
      CHECK(*e.alignment ==
            std::vector<AlignmentLink>{{1, 3}, {2, 4}, {3, 4}, {4, 4}});
      CHECK(e.tgt[0] == e.src[2]);
      CHECK(e.tgt[1] == e.src[3]);
      CHECK(e.tgt[2] == kUnk);
      CHECK(e.tgt[3] == kUnk);
    }
  }
}

TEST_CASE("synthetic generation is seeded and validated") {
  SyntheticTaskSpec spec;
  auto a = generate_synthetic(spec, 30);
  auto b = generate_synthetic(spec, 30);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].src == b[i].src);
  spec.seed = 2;
  auto c = generate_synthetic(spec, 30);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].src != c[i].src;
  CHECK(differs);

  spec.vocab = 4;
  CHECK_THROWS_AS(generate_synthetic(spec, 1), ConfigError);
  spec.vocab = 8;
  CHECK_THROWS_AS(generate_synthetic(spec, 0), ContractError);
  spec.min_len = 6;
  spec.max_len = 5;
  CHECK_THROWS_AS(generate_synthetic(spec, 1), ConfigError);
}

TEST_CASE("token frequencies are uniform") {
  for (bool walk : {false, true}) {
    SyntheticTaskSpec spec;
    spec.vocab = 24;
    spec.min_len = 10;
    spec.max_len = 10;
    spec.walk = walk;
    spec.seed = 11;
    auto ex = generate_synthetic(spec, 10000);  // 10^5 source tokens
    std::vector<double> counts(spec.vocab, 0.0);
    double total = 0.0;
    for (const auto& e : ex) {
      for (TokenId t : e.src) {
        counts[t] += 1.0;
        total += 1.0;
      }
    }
    const double expected = total / static_cast<double>(spec.vocab - kReservedTokens);
    for (std::size_t t = kReservedTokens; t < spec.vocab; ++t) {
      CHECK(std::abs(counts[t] - expected) / expected <= 0.05);
    }
  }
}

TEST_CASE("vocabulary") {
  Vocabulary v = Vocabulary::from_counts({{"b", 2}, {"a", 2}, {"c", 5}});
  CHECK(v.size() == 3 + kReservedTokens);
  CHECK(v.id("c") == 4);
  CHECK(v.id("a") == 5);
  CHECK(v.id("b") == 6);
  CHECK(v.id("zzz") == kUnk);
  CHECK(v.word(kBos) == "<s>");
  CHECK(v.decode(v.encode("c  a b")) == "c a b");
  CHECK_THROWS_AS(v.word(99), IndexError);

  Vocabulary s = Vocabulary::synthetic(8);
  for (TokenId t = kReservedTokens; t < 8; ++t) CHECK(s.id(s.word(t)) == t);
  CHECK_THROWS_AS(Vocabulary::from_words({"a", "b"}), ConfigError);
}

TEST_CASE("corpus loading") {
  const fs::path dir = scratch_dir();
  write_file(dir / "one.src", "hello world\n");
  write_file(dir / "one.tgt", "hello world\n");
  Corpus c = load_corpus(dir / "one.src", dir / "one.tgt");
  REQUIRE(c.examples.size() == 1);
  CHECK_FALSE(c.examples[0].alignment.has_value());
  CHECK(c.src_vocab.size() == 2 + kReservedTokens);

  write_file(dir / "three.src", "a b c\n\na a\n");
  write_file(dir / "three.tgt", "x\ny\nz z\n");
  Corpus t = load_corpus(dir / "three.src", dir / "three.tgt");
  CHECK(t.examples.size() == 2);
  CHECK(t.skipped_lines == 1);
  CHECK(t.src_vocab.size() == 3 + kReservedTokens);

  write_file(dir / "short.tgt", "x\n");
  try {
    load_corpus(dir / "three.src", dir / "short.tgt");
    FAIL("expected an i/o error");
  } catch (const IoError& e) {
    const std::string what = e.what();
    CHECK(what.find(" 3") != std::string::npos);
    CHECK(what.find(" 1") != std::string::npos);
  }
  CHECK_THROWS_AS(load_corpus(dir / "missing.src", dir / "one.tgt"), IoError);
}

TEST_CASE("corpus files round trip with alignments") {
  SyntheticTaskSpec spec;
  spec.kind = TaskKind::lagged_map;
  spec.lag = 1;
  auto ex = generate_synthetic(spec, 12);
  const Vocabulary v = Vocabulary::synthetic(spec.vocab);
  write_corpus(scratch_dir(), "lag", ex, v, v);
  Corpus back = load_corpus(scratch_dir() / "lag.src", scratch_dir() / "lag.tgt",
                            &v, &v);
  attach_alignments(scratch_dir() / "lag.align", back.examples);
  REQUIRE(back.examples.size() == ex.size());
  for (std::size_t i = 0; i < ex.size(); ++i) {
    CHECK(back.examples[i].src == ex[i].src);
    CHECK(back.examples[i].tgt == ex[i].tgt);
    CHECK(back.examples[i].alignment == ex[i].alignment);
  }
  write_file(scratch_dir() / "bad.align", "1-99\n");
  std::vector<ParallelExample> one(back.examples.begin(), back.examples.begin() + 1);
  CHECK_THROWS_AS(attach_alignments(scratch_dir() / "bad.align", one), IoError);
}

TEST_CASE("batches bucket by length and pad with masks") {
  SyntheticTaskSpec spec;
  spec.min_len = 2;
  spec.max_len = 9;
  auto ex = generate_synthetic(spec, 37);
  auto batches = make_batches(ex, 8, 3);
  CHECK(batches.size() == 5);
  std::set<std::size_t> seen;
  for (const auto& b : batches) {
    CHECK(b.indices.size() <= 8);
    for (std::size_t i : b.indices) {
      CHECK(seen.insert(i).second);
      CHECK(ex[i].src.size() <= b.padded_len);
    }
    auto [tokens, keep] = pad_sources(ex, b);
    for (std::size_t r = 0; r < b.indices.size(); ++r) {
      const auto& src = ex[b.indices[r]].src;
      for (std::size_t c = 0; c < b.padded_len; ++c) {
        const bool real = c < src.size();
        CHECK(keep[r * b.padded_len + c] == (real ? 1 : 0));
        CHECK(tokens[r * b.padded_len + c] == (real ? src[c] : kPad));
      }
    }
  }
  CHECK(seen.size() == ex.size());
  CHECK_THROWS_AS(make_batches(ex, 0, 1), ConfigError);
}
