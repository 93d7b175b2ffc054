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


#include "simulst/commands.hpp"

#include <fstream>

#include "simulst/bench.hpp"
#include "simulst/errors.hpp"
#include "simulst/eval.hpp"
#include "simulst/training.hpp"

namespace simulst {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

Corpus load_split(const ExperimentConfig& config, const std::string& stem,
                  const Vocabulary* src_vocab, const Vocabulary* tgt_vocab) {
  const auto base = config.data_dir / stem;
  Corpus corpus = load_corpus(base.string() + ".src", base.string() + ".tgt",
                              src_vocab, tgt_vocab);
  const std::filesystem::path align = base.string() + ".align";
  if (std::filesystem::exists(align)) attach_alignments(align, corpus.examples);
  return corpus;
}

// Trains one student (and its teacher when configured); returns nothing but
// writes the checkpoint and metrics into `dir`.
void train_into(const ExperimentConfig& config, const Corpus& corpus,
                const std::filesystem::path& dir, std::ostream& log) {
  if (config.variant == ModelVariant::teacher) {
    throw ConfigError("model.variant must be a wait-k student; the teacher is "
                      "trained alongside it");
  }
  ModelConfig mc = config.model;
  mc.src_vocab = corpus.src_vocab.size();
  mc.tgt_vocab = corpus.tgt_vocab.size();
  mc.wait_k = config.train.k;
  TransformerModel student(mc, config.variant, config.model_seed);
  std::optional<TransformerModel> teacher;
  if (config.train.use_teacher) {
    teacher.emplace(mc, ModelVariant::teacher, config.model_seed + 1);
  }
  Trainer trainer(student, teacher ? &*teacher : nullptr, config.train,
                  corpus.examples);
  auto metrics = open_out(dir / "metrics.csv");
  metrics << kMetricsHeader << '\n';
  trainer.run([&](const StepMetrics& m) {
    metrics << metrics_row(m) << '\n';
    if (m.step % 100 == 0) log << "step " << metrics_row(m) << '\n';
  });
  if (!metrics) throw IoError("failed writing metrics.csv");
  std::map<std::string, std::string> meta = {
      {"train.k", std::to_string(config.train.k)},
      {"train.steps", std::to_string(config.train.max_steps)},
      {"train.mode", std::string(mode_name(config.train.mode))}};
  save_checkpoint(dir == config.out_dir ? config.checkpoint_path() : dir / "model.ckpt",
                  student, teacher ? &*teacher : nullptr, corpus.src_vocab,
                  corpus.tgt_vocab, meta);
  open_out(dir / "config.txt") << config.to_text();
}

}  // namespace

Checkpoint load_checked_checkpoint(const std::filesystem::path& path,
                                   const ExperimentConfig* config) {
  Checkpoint ck = load_checkpoint(path);
  if (config) {
    const ModelConfig& a = ck.student.config();
    const ModelConfig& b = config->model;
    if (a.n_layers != b.n_layers || a.d_model != b.d_model ||
        a.n_heads != b.n_heads || a.d_ff != b.d_ff ||
        ck.student.variant() != config->variant) {
      throw CheckpointError(path.string() + " holds a " +
                            std::string(variant_name(ck.student.variant())) +
                            " model with layers=" + std::to_string(a.n_layers) +
                            " d_model=" + std::to_string(a.d_model) +
                            " heads=" + std::to_string(a.n_heads) +
                            " d_ff=" + std::to_string(a.d_ff) +
                            ", which does not match the configuration");
    }
  }
  return ck;
}

void command_gen_data(const ExperimentConfig& config, std::ostream& log) {
  SyntheticTaskSpec train_spec = config.task;
  SyntheticTaskSpec test_spec = config.task;
  test_spec.seed = config.task.seed + 0x9E3779B97F4A7C15ULL;
  const auto train = generate_synthetic(train_spec, config.train_size);
  const auto test = generate_synthetic(test_spec, config.test_size);
  const Vocabulary vocab = Vocabulary::synthetic(config.task.vocab);
  write_corpus(config.data_dir, "train", train, vocab, vocab);
  write_corpus(config.data_dir, "test", test, vocab, vocab);
  log << "wrote " << train.size() << " training and " << test.size()
      << " test pairs to " << config.data_dir.string() << '\n';
}

void command_train(const ExperimentConfig& config, std::ostream& log) {
  const Corpus corpus = load_split(config, "train", nullptr, nullptr);
  if (corpus.skipped_lines) {
    log << "skipped " << corpus.skipped_lines << " pairs with an empty side\n";
  }
  train_into(config, corpus, config.out_dir, log);
  log << "saved " << config.checkpoint_path().string() << '\n';
}

void command_eval(const ExperimentConfig& config, std::ostream& log) {
  const Checkpoint ck = load_checked_checkpoint(config.checkpoint_path(), &config);
  const Corpus test = load_split(config, "test", &ck.src_vocab, &ck.tgt_vocab);
  auto traces = open_out(config.out_dir / "traces.jsonl");
  std::vector<Sentence> hyps;
  EvalOptions opt;
  opt.k = config.test_k();
  opt.teacher = ck.teacher ? &*ck.teacher : nullptr;
  opt.traces = &traces;
  opt.outputs = &hyps;
  const EvalReport report = evaluate_model(ck.student, test.examples, opt);
  auto csv = open_out(config.out_dir / "eval.csv");
  csv << eval_csv_header() << '\n' << eval_csv_row(report) << '\n';
  auto out = open_out(config.out_dir / "hypotheses.txt");
  for (const auto& h : hyps) out << ck.tgt_vocab.decode(h) << '\n';
  if (!csv || !out || !traces) throw IoError("failed writing evaluation output");
  log << eval_csv_header() << '\n' << eval_csv_row(report) << '\n';
  log << "decode time " << report.decode_secs << " s\n";
}

void command_kmatrix(const ExperimentConfig& config, std::ostream& log) {
  const Corpus train = load_split(config, "train", nullptr, nullptr);
  std::vector<Checkpoint> models;
  for (std::size_t k : config.kmatrix_train_k) {
    ExperimentConfig c = config;
    c.train.k = k;
    const auto dir = config.out_dir / ("k" + std::to_string(k));
    log << "training k=" << k << '\n';
    train_into(c, train, dir, log);
    models.push_back(load_checkpoint(dir / "model.ckpt"));
  }
  const Corpus test =
      load_split(config, "test", &models.front().src_vocab, &models.front().tgt_vocab);
  std::vector<TrainedAtK> entries;
  for (std::size_t i = 0; i < models.size(); ++i) {
    entries.push_back({config.kmatrix_train_k[i], &models[i].student});
  }
  const KMatrix m = k_matrix(entries, config.kmatrix_test_k, test.examples);
  open_out(config.out_dir / "kmatrix.csv") << m.to_csv();
  log << m.to_csv();
}

void command_bench(const ExperimentConfig& config, std::ostream& log) {
  BenchOptions opt;
  opt.model = config.model;
  opt.model.src_vocab = config.task.vocab;
  opt.model.tgt_vocab = config.task.vocab;
  opt.batch = config.bench_batch;
  opt.trials = config.bench_trials;
  opt.seed = config.model_seed;
  const auto rows = scaling_sweep(config.bench_n, config.bench_k, opt);
  auto csv = open_out(config.out_dir / "bench.csv");
  csv << kBenchHeader << '\n';
  log << kBenchHeader << '\n';
  for (const auto& r : rows) {
    csv << bench_csv_row(r) << '\n';
    log << bench_csv_row(r) << '\n';
  }
}

void run_command(std::string_view name, const ExperimentConfig& config,
                 std::ostream& log) {
  if (name == "gen-data") return command_gen_data(config, log);
  if (name == "train") return command_train(config, log);
  if (name == "eval") return command_eval(config, log);
  if (name == "k-matrix") return command_kmatrix(config, log);
  if (name == "bench") return command_bench(config, log);
  throw ConfigError("unknown command '" + std::string(name) + "'");
}

}  // namespace simulst
