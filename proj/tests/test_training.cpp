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
#include <limits>
#include <sstream>

#include "doctest.h"
#include "gradcheck.hpp"
#include "simulst/errors.hpp"
#include "simulst/training.hpp"

using namespace simulst;
using simulst::testing::gradcheck;
using simulst::testing::random_tensor;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.n_layers = 1;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ff = 16;
  c.src_vocab = 12;
  c.tgt_vocab = 12;
  c.max_len = 30;
  return c;
}

std::vector<ParallelExample> tiny_data(std::size_t count, std::uint64_t seed = 2) {
  SyntheticTaskSpec spec;
  spec.kind = TaskKind::lagged_map;
  spec.vocab = 12;
  spec.lag = 1;
  spec.min_len = 4;
  spec.max_len = 7;
  spec.seed = seed;
  return generate_synthetic(spec, count);
}

TrainConfig small_train(std::size_t steps) {
  TrainConfig t;
  t.batch_size = 4;
  t.max_steps = steps;
  t.k = 2;
  t.lr = 3e-3;
  return t;
}

std::vector<double> flat_values(const TransformerModel& m) {
  std::vector<double> out;
  for (const auto& [name, t] : m.parameters()) {
    out.insert(out.end(), t.values().begin(), t.values().end());
  }
  return out;
}

}  // namespace

TEST_CASE("loss composition") {
  std::mt19937_64 rng(1);
  const Tensor ls = random_tensor({4, 6}, rng);
  const Tensor lt = random_tensor({4, 6}, rng);
  const std::vector<TokenId> targets = {4, 5, kPad, 2};
  const Tensor za = random_tensor({3, 5}, rng);
  const Tensor zb = random_tensor({3, 5}, rng);

  const LossTerms zero = total_loss(ls, lt, targets, za, zb, 0.0);
  CHECK(zero.total.item() == doctest::Approx(zero.student.item() + zero.teacher.item())
                                 .epsilon(1e-14));
  const LossTerms same = total_loss(ls, lt, targets, za, za, 0.1);
  CHECK(same.distill.item() == 0.0);
  const LossTerms solo = total_loss(ls, Tensor(), targets, za, zb, 0.1);
  CHECK(solo.total.item() ==
        doctest::Approx(solo.student.item() + 0.1 * solo.distill.item()).epsilon(1e-14));

  // Independent value of the distillation term.
  double ref = 0.0;
  for (std::size_t i = 0; i < za.numel(); ++i) {
    const double d = za.values()[i] - zb.values()[i];
    ref += d * d;
  }
  CHECK(same.total.item() != solo.total.item());
  CHECK(solo.distill.item() == doctest::Approx(ref / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(total_loss(ls, lt, targets, za, random_tensor({2, 5}, rng), 0.1),
                  DimensionError);
}

TEST_CASE("distillation gradient matches finite differences") {
  std::mt19937_64 rng(2);
  const Tensor logits = random_tensor({3, 5}, rng, -1, 1, false);
  const std::vector<TokenId> targets = {1, 2, 3};
  const Tensor z_full = random_tensor({4, 6}, rng, -1, 1, false);
  auto report = gradcheck(
      [&](const std::vector<Tensor>& in) {
        return total_loss(logits, Tensor(), targets, in[0], z_full, 0.7).total;
      },
      {random_tensor({4, 6}, rng)});
  CHECK(report.ok(1e-4));
}

TEST_CASE("padding rows do not contribute") {
  std::mt19937_64 rng(3);
  const Tensor a = random_tensor({5, 4}, rng);
  Tensor b = random_tensor({5, 4}, rng);
  const std::vector<std::uint8_t> keep = {1, 1, 1, 0, 0};
  const double before = l2_distance_loss(a, b, keep).item();
  for (std::size_t i = 12; i < 20; ++i) b.mutable_values()[i] += 100.0;
  CHECK(l2_distance_loss(a, b, keep).item() == before);

  const Tensor logits = random_tensor({3, 6}, rng);
  const std::vector<TokenId> t1 = {4, kPad, 5};
  const std::vector<TokenId> t2 = {4, 5};
  const std::vector<Tensor> parts = {slice_rows(logits, 0, 1), slice_rows(logits, 2, 3)};
  const Tensor kept = concat_rows(parts);
  CHECK(cross_entropy(logits, t1, kPad).item() ==
        doctest::Approx(cross_entropy(kept, t2, kPad).item()).epsilon(1e-14));
}

TEST_CASE("training reduces the loss on a fixed batch") {
  const auto data = tiny_data(4);
  TransformerModel student(tiny_config(), ModelVariant::incremental_ael, 1);
  TransformerModel teacher(tiny_config(), ModelVariant::teacher, 2);
  Trainer trainer(student, &teacher, small_train(10), data);
  const std::vector<std::size_t> batch = {0, 1, 2, 3};
  const StepMetrics first = trainer.train_step(batch);
  CHECK(first.loss_distill > 0.0);
  CHECK(first.grad_norm > 0.0);
  StepMetrics last = first;
  for (int i = 0; i < 9; ++i) last = trainer.train_step(batch);
  CHECK(last.loss_student < first.loss_student);
  CHECK(last.loss_teacher < first.loss_teacher);
  CHECK(trainer.steps_done() == 10);
}

TEST_CASE("training is deterministic") {
  const auto data = tiny_data(12);
  auto run_once = [&] {
    TransformerModel student(tiny_config(), ModelVariant::incremental_ael, 4);
    TransformerModel teacher(tiny_config(), ModelVariant::teacher, 5);
    Trainer trainer(student, &teacher, small_train(50), data);
    std::ostringstream csv;
    write_metrics_csv(csv, trainer.run());
    return std::make_pair(csv.str(), flat_values(student));
  };
  const auto a = run_once();
  const auto b = run_once();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first.rfind(std::string(kMetricsHeader) + "\n1,", 0) == 0);
}

TEST_CASE("pretrained teacher stays frozen") {
  const auto data = tiny_data(8);
  TransformerModel student(tiny_config(), ModelVariant::incremental_ael, 6);
  TransformerModel teacher(tiny_config(), ModelVariant::teacher, 7);
  TrainConfig cfg = small_train(5);
  cfg.mode = TrainMode::pretrain_fixed_teacher;
  cfg.pretrain_steps = 3;
  const auto initial = flat_values(teacher);
  std::vector<double> after_pretrain;
  std::vector<double> student_before;
  Trainer trainer(student, &teacher, cfg, data);
  const auto log = trainer.run([&](const StepMetrics& m) {
    if (m.step == 3) {
      after_pretrain = flat_values(teacher);
      student_before = flat_values(student);
    }
  });
  REQUIRE(log.size() == 8);
  CHECK(after_pretrain != initial);
  CHECK(student_before == flat_values(TransformerModel(tiny_config(),
                                                       ModelVariant::incremental_ael, 6)));
  CHECK(flat_values(teacher) == after_pretrain);
  CHECK(flat_values(student) != student_before);
  CHECK(log[3].loss_teacher == 0.0);
  CHECK(log[3].loss_distill > 0.0);
}

TEST_CASE("student without a teacher") {
  const auto data = tiny_data(4);
  TransformerModel student(tiny_config(), ModelVariant::baseline_uni, 1);
  TrainConfig cfg = small_train(3);
  cfg.use_teacher = false;
  Trainer trainer(student, nullptr, cfg, data);
  for (const auto& m : trainer.run()) {
    CHECK(m.loss_teacher == 0.0);
    CHECK(m.loss_distill == 0.0);
  }
}

TEST_CASE("non-finite values are reported") {
  const auto data = tiny_data(4);
  TransformerModel student(tiny_config(), ModelVariant::incremental_ael, 1);
  TransformerModel teacher(tiny_config(), ModelVariant::teacher, 2);
  student.output.weight.mutable_values()[0] = std::numeric_limits<double>::quiet_NaN();
  Trainer trainer(student, &teacher, small_train(1), data);
  const std::vector<std::size_t> batch = {0, 1};
  CHECK_THROWS_AS(trainer.train_step(batch), NumericError);
}

TEST_CASE("configuration errors") {
  const auto data = tiny_data(2);
  TransformerModel student(tiny_config(), ModelVariant::incremental_ael, 1);
  TransformerModel teacher(tiny_config(), ModelVariant::teacher, 2);
  TrainConfig bad = small_train(1);
  bad.lr = 0.0;
  CHECK_THROWS_AS(Trainer(student, &teacher, bad, data), ConfigError);
  CHECK_THROWS_AS(Trainer(teacher, &teacher, small_train(1), data), ConfigError);
  CHECK_THROWS_AS(Trainer(student, &student, small_train(1), data), ConfigError);
  CHECK_THROWS_AS(Trainer(student, &teacher, small_train(1), {}), ConfigError);
  CHECK(parse_mode("joint") == TrainMode::joint);
  CHECK_THROWS_AS(parse_mode("both"), ConfigError);
}
