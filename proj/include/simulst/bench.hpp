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

// Forward-pass benchmark comparing the recompute baseline, the incremental
// encoder with AEL and the offline encoder, by wall time and by the matmul
// multiply-accumulate counter.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "simulst/transformer.hpp"

namespace simulst {

enum class BenchVariant { offline, baseline_bi, incremental_ael };

std::string_view bench_variant_name(BenchVariant v);
BenchVariant parse_bench_variant(std::string_view name);  // ConfigError

struct BenchResult {
  BenchVariant variant = BenchVariant::offline;
  std::size_t n = 0;      // source length
  std::size_t steps = 0;  // decode steps T
  std::size_t k = 0;
  std::size_t batch = 0;
  double median_secs = 0.0;          // one forward pass over the batch
  std::uint64_t mac_count = 0;       // same pass
  double encoder_secs = 0.0;         // encoder portion only
  std::uint64_t encoder_mac_count = 0;
};

struct BenchOptions {
  ModelConfig model;         // vocabularies and max_len are widened as needed
  std::size_t batch = 1;
  std::size_t trials = 5;    // median of at least 5
  std::uint64_t seed = 1;
};

// Times one batched forward pass (after one warm-up run) with T = steps.
BenchResult bench_forward(BenchVariant variant, std::size_t n, std::size_t steps,
                          std::size_t k, const BenchOptions& options);

// Every variant for every (n, k) pair with T = n.
std::vector<BenchResult> scaling_sweep(std::span<const std::size_t> n_values,
                                       std::span<const std::size_t> k_values,
                                       const BenchOptions& options);

inline constexpr std::string_view kBenchHeader =
    "variant,n,T,k,median_secs,mac_count,encoder_secs,encoder_mac_count";
std::string bench_csv_row(const BenchResult& r);

// Closed-form MACs of one bidirectional or unidirectional encoder pass over
// n tokens: N * (4 n d^2 + 2 n^2 d + 2 n d d_ff).
std::uint64_t encoder_macs(const ModelConfig& config, std::size_t n);
// Extra encoder-side cost of AEL: cumulative means (n^2 d) and one d x d
// projection per token (n d^2).
std::uint64_t ael_macs(const ModelConfig& config, std::size_t n);
// Closed-form MACs of a full offline forward pass with T decoder positions.
std::uint64_t offline_forward_macs(const ModelConfig& config, std::size_t n,
                                   std::size_t steps);

}  // namespace simulst
