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

// Joint student/teacher training:
//
//   L = CE(student) + CE(teacher) + lambda * L2(z_incr, z_full)
//
// In pretrain_fixed_teacher mode the teacher is first trained alone, then
// frozen; the student loss keeps the L2 term against the fixed teacher states.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "simulst/data.hpp"
#include "simulst/transformer.hpp"

namespace simulst {

enum class TrainMode { joint, pretrain_fixed_teacher };

std::string_view mode_name(TrainMode mode);
TrainMode parse_mode(std::string_view name);

struct TrainConfig {
  double lambda = 0.1;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  std::size_t batch_size = 16;
  std::size_t max_steps = 1000;
  std::uint64_t seed = 1;
  TrainMode mode = TrainMode::joint;
  std::size_t k = 3;
  // Teacher-only steps run before the student in pretrain_fixed_teacher mode.
  std::size_t pretrain_steps = 1000;
  // Joint mode: let the L2 term also move the teacher encoder.
  bool distill_into_teacher = true;
  // Train the student alone (no teacher, no L2 term).
  bool use_teacher = true;

  void validate() const;
};

// Value of each loss component at one step.
struct StepMetrics {
  std::size_t step = 0;
  double loss_student = 0.0;
  double loss_teacher = 0.0;
  double loss_distill = 0.0;
  double grad_norm = 0.0;
};

inline constexpr std::string_view kMetricsHeader =
    "step,loss_student,loss_teacher,loss_distill,grad_norm";
std::string metrics_row(const StepMetrics& m);

struct LossTerms {
  Tensor total;
  Tensor student;  // CE of the student
  Tensor teacher;  // CE of the teacher, undefined when dropped
  Tensor distill;  // L2 between encoder states before lambda
};

// Single-sentence composite loss. teacher_logits may be undefined (teacher CE
// dropped); keep marks the real source rows for the L2 term (all when empty).
LossTerms total_loss(const Tensor& student_logits, const Tensor& teacher_logits,
                     std::span<const TokenId> targets, const Tensor& z_incr,
                     const Tensor& z_full, double lambda,
                     std::span<const std::uint8_t> keep = {});

class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr, double beta1, double beta2,
       double eps);
  // Applies one update from the accumulated gradients.
  void step();
  std::size_t steps() const noexcept { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

// L2 norm over all gradients of the given tensors.
double gradient_norm(std::span<const Tensor> params);

class Trainer {
 public:
  // teacher may be null when config.use_teacher is false.
  Trainer(TransformerModel& student, TransformerModel* teacher,
          const TrainConfig& config, std::span<const ParallelExample> data);

  // One Adam update on a batch of example indices. Per-sentence terms are
  // summed and divided by the batch's real target (CE) or source (L2) token
  // count. Throws NumericError on a non-finite component.
  StepMetrics train_step(std::span<const std::size_t> batch);
  // Teacher-only update (pretraining phase).
  StepMetrics pretrain_step(std::span<const std::size_t> batch);

  // Runs the configured schedule. on_step sees every record.
  std::vector<StepMetrics> run(
      const std::function<void(const StepMetrics&)>& on_step = {});

  std::size_t steps_done() const noexcept { return step_; }

 private:
  std::vector<std::size_t> next_batch();

  TransformerModel& student_;
  TransformerModel* teacher_;
  TrainConfig config_;
  std::span<const ParallelExample> data_;
  Adam student_opt_;
  Adam teacher_opt_;
  std::vector<Batch> batches_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
  std::size_t step_ = 0;
};

// Writes the header and one row per record.
void write_metrics_csv(std::ostream& out, std::span<const StepMetrics> rows);

}  // namespace simulst
