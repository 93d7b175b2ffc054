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


#include "simulst/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>

#ifdef __linux__
#include <sched.h>
#endif

#include "simulst/errors.hpp"
#include "simulst/schedule.hpp"

namespace simulst {

namespace {

using Clock = std::chrono::steady_clock;

// Keeps the timing thread on the CPU it started on.
void pin_current_thread() {
#ifdef __linux__
  const int cpu = sched_getcpu();
  if (cpu < 0) return;
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(cpu, &set);
  sched_setaffinity(0, sizeof(set), &set);
#endif
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double time_once(const std::function<void()>& body) {
  const auto start = Clock::now();
  body();
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t count_macs(const std::function<void()>& body) {
  mac_counter::reset();
  body();
  return mac_counter::value();
}

ModelVariant model_variant(BenchVariant v) {
  switch (v) {
    case BenchVariant::offline: return ModelVariant::teacher;
    case BenchVariant::baseline_bi: return ModelVariant::baseline_bi;
    case BenchVariant::incremental_ael: return ModelVariant::incremental_ael;
  }
  return ModelVariant::teacher;
}

std::uint64_t u(std::size_t v) { return static_cast<std::uint64_t>(v); }

}  // namespace

std::string_view bench_variant_name(BenchVariant v) {
  switch (v) {
    case BenchVariant::offline: return "offline";
    case BenchVariant::baseline_bi: return "baseline_bi";
    case BenchVariant::incremental_ael: return "incremental_ael";
  }
  return "offline";
}

BenchVariant parse_bench_variant(std::string_view name) {
  for (BenchVariant v : {BenchVariant::offline, BenchVariant::baseline_bi,
                         BenchVariant::incremental_ael}) {
    if (bench_variant_name(v) == name) return v;
  }
  throw ConfigError("unknown benchmark variant '" + std::string(name) + "'");
}

std::uint64_t encoder_macs(const ModelConfig& c, std::size_t n) {
  const std::uint64_t d = u(c.d_model), nn = u(n);
  return u(c.n_layers) * (4 * nn * d * d + 2 * nn * nn * d + 2 * nn * d * u(c.d_ff));
}

std::uint64_t ael_macs(const ModelConfig& c, std::size_t n) {
  const std::uint64_t d = u(c.d_model), nn = u(n);
  return nn * nn * d + nn * d * d;
}

std::uint64_t offline_forward_macs(const ModelConfig& c, std::size_t n,
                                   std::size_t steps) {
  const std::uint64_t d = u(c.d_model), nn = u(n), t = u(steps);
  const std::uint64_t self = 4 * t * d * d + 2 * t * t * d;
  const std::uint64_t cross = 2 * t * d * d + 2 * nn * d * d + 2 * t * nn * d;
  const std::uint64_t ff = 2 * t * d * u(c.d_ff);
  return encoder_macs(c, n) + u(c.n_layers) * (self + cross + ff) +
         t * d * u(c.tgt_vocab);
}

namespace {

struct BenchCase {
  BenchResult result;
  std::shared_ptr<const TransformerModel> model;
  std::vector<std::vector<TokenId>> sources, inputs;
  WaitKSchedule schedule;
  std::function<void()> full, encoder;
};

std::unique_ptr<BenchCase> prepare(BenchVariant variant, std::size_t n,
                                   std::size_t steps, std::size_t k,
                                   const BenchOptions& options) {
  if (n == 0 || steps == 0) throw ConfigError("benchmark lengths must be positive");
  if (k == 0) throw ConfigError("wait-k needs k >= 1");
  if (options.batch == 0) throw ConfigError("benchmark batch must be positive");
  if (options.trials < 5) throw ConfigError("benchmark needs at least 5 trials");
  ModelConfig config = options.model;
  config.max_len = std::max({config.max_len, n, steps + 1});
  config.validate();
  auto c = std::unique_ptr<BenchCase>(new BenchCase{
      {}, std::make_shared<const TransformerModel>(config, model_variant(variant),
                                                   options.seed),
      {}, {}, WaitKSchedule(k, n), {}, {}});
  c->result.variant = variant;
  c->result.n = n;
  c->result.steps = steps;
  c->result.k = k;
  c->result.batch = options.batch;

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<TokenId> src_tok(
      kReservedTokens, static_cast<TokenId>(config.src_vocab - 1));
  std::uniform_int_distribution<TokenId> tgt_tok(
      kReservedTokens, static_cast<TokenId>(config.tgt_vocab - 1));
  c->sources.resize(options.batch);
  c->inputs.resize(options.batch);
  for (std::size_t b = 0; b < options.batch; ++b) {
    c->sources[b].resize(n);
    for (auto& t : c->sources[b]) t = src_tok(rng);
    c->inputs[b].assign(1, kBos);
    for (std::size_t s = 1; s < steps; ++s) c->inputs[b].push_back(tgt_tok(rng));
  }

  BenchCase* p = c.get();
  p->full = [p] {
    const TransformerModel& model = *p->model;
    for (std::size_t b = 0; b < p->sources.size(); ++b) {
      if (model.variant() == ModelVariant::teacher) {
        forward_teacher(model, p->sources[b], p->inputs[b]);
      } else {
        forward_student(model, p->sources[b], p->inputs[b], p->schedule);
      }
    }
  };
  p->encoder = [p] {
    const TransformerModel& model = *p->model;
    for (std::size_t b = 0; b < p->sources.size(); ++b) {
      switch (model.variant()) {
        case ModelVariant::baseline_bi:
          encode_waitk_recompute(model, p->sources[b], p->schedule,
                                 p->inputs[b].size());
          break;
        case ModelVariant::incremental_ael: {
          const EncoderOutput enc = encode_unidirectional(model, p->sources[b]);
          ael_summary(enc.embeddings, model.ael_weight);
          break;
        }
        default:
          encode_bidirectional(model, p->sources[b]);
          break;
      }
    }
  };
  return c;
}

// Trials are interleaved across cases so slow drifts of the machine affect
// every case alike.
void run_interleaved(std::vector<std::unique_ptr<BenchCase>>& cases,
                     std::size_t trials) {
  TapeScope no_tape(nullptr);
  pin_current_thread();
  for (auto& c : cases) {
    c->full();  // warm-up
    c->result.mac_count = count_macs(c->full);
    c->result.encoder_mac_count = count_macs(c->encoder);
  }
  std::vector<std::vector<double>> full(cases.size()), enc(cases.size());
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t i = 0; i < cases.size(); ++i) {
      full[i].push_back(time_once(cases[i]->full));
      enc[i].push_back(time_once(cases[i]->encoder));
    }
  }
  for (std::size_t i = 0; i < cases.size(); ++i) {
    cases[i]->result.median_secs = median(full[i]);
    cases[i]->result.encoder_secs = median(enc[i]);
  }
}

}  // namespace

BenchResult bench_forward(BenchVariant variant, std::size_t n, std::size_t steps,
                          std::size_t k, const BenchOptions& options) {
  std::vector<std::unique_ptr<BenchCase>> cases;
  cases.push_back(prepare(variant, n, steps, k, options));
  run_interleaved(cases, options.trials);
  return cases.front()->result;
}

std::vector<BenchResult> scaling_sweep(std::span<const std::size_t> n_values,
                                       std::span<const std::size_t> k_values,
                                       const BenchOptions& options) {
  std::vector<std::unique_ptr<BenchCase>> cases;
  for (std::size_t n : n_values) {
    for (std::size_t k : k_values) {
      for (BenchVariant v : {BenchVariant::offline, BenchVariant::baseline_bi,
                             BenchVariant::incremental_ael}) {
        cases.push_back(prepare(v, n, n, k, options));
      }
    }
  }
  run_interleaved(cases, options.trials);
  std::vector<BenchResult> out;
  for (const auto& c : cases) out.push_back(c->result);
  return out;
}

std::string bench_csv_row(const BenchResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%zu,%.9f,%llu,%.9f,%llu",
                std::string(bench_variant_name(r.variant)).c_str(), r.n, r.steps,
                r.k, r.median_secs, static_cast<unsigned long long>(r.mac_count),
                r.encoder_secs,
                static_cast<unsigned long long>(r.encoder_mac_count));
  return buf;
}

}  // namespace simulst
