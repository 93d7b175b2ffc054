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


#include "simulst/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "simulst/errors.hpp"

namespace simulst {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value,
                            const char* expected) {
  throw ConfigError("key '" + std::string(key) + "': '" + std::string(value) +
                    "' is not " + expected);
}

std::size_t to_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    bad_value(key, v, "a non-negative integer");
  }
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    bad_value(key, v, "a number");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::size_t> to_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(to_size(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) bad_value(key, v, "a comma-separated list");
  return out;
}

std::string from_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string from_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

struct Field {
  std::function<void(ExperimentConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Member>
Field size_field(Member member) {
  return {[member](ExperimentConfig& c, std::string_view k, std::string_view v) {
            member(c) = to_size(k, v);
          },
          [member](const ExperimentConfig& c) {
            return std::to_string(member(const_cast<ExperimentConfig&>(c)));
          }};
}

template <typename Member>
Field double_field(Member member) {
  return {[member](ExperimentConfig& c, std::string_view k, std::string_view v) {
            member(c) = to_double(k, v);
          },
          [member](const ExperimentConfig& c) {
            return from_double(member(const_cast<ExperimentConfig&>(c)));
          }};
}

template <typename Member>
Field bool_field(Member member) {
  return {[member](ExperimentConfig& c, std::string_view k, std::string_view v) {
            member(c) = to_bool(k, v);
          },
          [member](const ExperimentConfig& c) {
            return std::string(member(const_cast<ExperimentConfig&>(c)) ? "true"
                                                                        : "false");
          }};
}

template <typename Member>
Field list_field(Member member) {
  return {[member](ExperimentConfig& c, std::string_view k, std::string_view v) {
            member(c) = to_list(k, v);
          },
          [member](const ExperimentConfig& c) {
            return from_list(member(const_cast<ExperimentConfig&>(c)));
          }};
}

template <typename Member>
Field path_field(Member member) {
  return {[member](ExperimentConfig& c, std::string_view, std::string_view v) {
            member(c) = std::filesystem::path(std::string(v));
          },
          [member](const ExperimentConfig& c) {
            return member(const_cast<ExperimentConfig&>(c)).string();
          }};
}

#define SIMULST_MEMBER(expr) [](ExperimentConfig& c) -> auto& { return c.expr; }

const std::map<std::string, Field, std::less<>>& fields() {
  static const std::map<std::string, Field, std::less<>> table = {
      {"model.variant",
       {[](ExperimentConfig& c, std::string_view, std::string_view v) {
          c.variant = parse_variant(v);
        },
        [](const ExperimentConfig& c) { return std::string(variant_name(c.variant)); }}},
      {"model.layers", size_field(SIMULST_MEMBER(model.n_layers))},
      {"model.d_model", size_field(SIMULST_MEMBER(model.d_model))},
      {"model.heads", size_field(SIMULST_MEMBER(model.n_heads))},
      {"model.d_ff", size_field(SIMULST_MEMBER(model.d_ff))},
      {"model.max_len", size_field(SIMULST_MEMBER(model.max_len))},
      {"model.seed", size_field(SIMULST_MEMBER(model_seed))},
      {"train.lambda", double_field(SIMULST_MEMBER(train.lambda))},
      {"train.lr", double_field(SIMULST_MEMBER(train.lr))},
      {"train.beta1", double_field(SIMULST_MEMBER(train.beta1))},
      {"train.beta2", double_field(SIMULST_MEMBER(train.beta2))},
      {"train.eps", double_field(SIMULST_MEMBER(train.eps))},
      {"train.batch_size", size_field(SIMULST_MEMBER(train.batch_size))},
      {"train.steps", size_field(SIMULST_MEMBER(train.max_steps))},
      {"train.seed", size_field(SIMULST_MEMBER(train.seed))},
      {"train.k", size_field(SIMULST_MEMBER(train.k))},
      {"train.pretrain_steps", size_field(SIMULST_MEMBER(train.pretrain_steps))},
      {"train.distill_into_teacher",
       bool_field(SIMULST_MEMBER(train.distill_into_teacher))},
      {"train.use_teacher", bool_field(SIMULST_MEMBER(train.use_teacher))},
      {"train.mode",
       {[](ExperimentConfig& c, std::string_view, std::string_view v) {
          c.train.mode = parse_mode(v);
        },
        [](const ExperimentConfig& c) { return std::string(mode_name(c.train.mode)); }}},
      {"data.task",
       {[](ExperimentConfig& c, std::string_view, std::string_view v) {
          c.task.kind = parse_task(v);
        },
        [](const ExperimentConfig& c) { return std::string(task_name(c.task.kind)); }}},
      {"data.vocab", size_field(SIMULST_MEMBER(task.vocab))},
      {"data.min_len", size_field(SIMULST_MEMBER(task.min_len))},
      {"data.max_len", size_field(SIMULST_MEMBER(task.max_len))},
      {"data.lag", size_field(SIMULST_MEMBER(task.lag))},
      {"data.seed", size_field(SIMULST_MEMBER(task.seed))},
      {"data.walk", bool_field(SIMULST_MEMBER(task.walk))},
      {"data.train_size", size_field(SIMULST_MEMBER(train_size))},
      {"data.test_size", size_field(SIMULST_MEMBER(test_size))},
      {"data.dir", path_field(SIMULST_MEMBER(data_dir))},
      {"out.dir", path_field(SIMULST_MEMBER(out_dir))},
      {"out.checkpoint", path_field(SIMULST_MEMBER(checkpoint))},
      {"eval.k", size_field(SIMULST_MEMBER(eval_k))},
      {"kmatrix.train_k", list_field(SIMULST_MEMBER(kmatrix_train_k))},
      {"kmatrix.test_k", list_field(SIMULST_MEMBER(kmatrix_test_k))},
      {"bench.n", list_field(SIMULST_MEMBER(bench_n))},
      {"bench.k", list_field(SIMULST_MEMBER(bench_k))},
      {"bench.trials", size_field(SIMULST_MEMBER(bench_trials))},
      {"bench.batch", size_field(SIMULST_MEMBER(bench_batch))},
  };
  return table;
}

#undef SIMULST_MEMBER

}  // namespace

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  const auto it = fields().find(key);
  if (it == fields().end()) {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
  it->second.set(*this, key, trim(value));
}

void ExperimentConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) +
                      "' is not of the form key=value");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void ExperimentConfig::validate() const {
  model.validate();
  train.validate();
  if (task.vocab <= kReservedTokens) throw ConfigError("data.vocab too small");
  if (task.min_len == 0 || task.min_len > task.max_len) {
    throw ConfigError("data.min_len/max_len do not form a range");
  }
  if (task.max_len > model.max_len) {
    throw ConfigError("data.max_len exceeds model.max_len");
  }
  if (train_size == 0 || test_size == 0) throw ConfigError("empty data split");
  for (const auto* list : {&kmatrix_train_k, &kmatrix_test_k, &bench_k, &bench_n}) {
    for (std::size_t v : *list) {
      if (v == 0) throw ConfigError("k and n lists need positive entries");
    }
  }
  if (bench_trials < 5) throw ConfigError("bench.trials must be at least 5");
  if (bench_batch == 0) throw ConfigError("bench.batch must be positive");
}

std::filesystem::path ExperimentConfig::checkpoint_path() const {
  return checkpoint.empty() ? out_dir / "model.ckpt" : checkpoint;
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& [key, field] : fields()) {
    out += key + " = " + field.get(*this) + "\n";
  }
  return out;
}

std::vector<std::string> ExperimentConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [key, field] : fields()) out.push_back(key);
  return out;
}

ExperimentConfig parse_config(std::string_view text,
                              const std::vector<std::string>& overrides) {
  ExperimentConfig config;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.find('=') == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    config.apply_override(line);
  }
  for (const auto& o : overrides) config.apply_override(o);
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), overrides);
}

}  // namespace simulst
