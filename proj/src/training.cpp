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

#include "simulst/training.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "simulst/errors.hpp"

namespace simulst {

namespace {

std::vector<Tensor> trainable(const TransformerModel* model) {
  std::vector<Tensor> out;
  if (!model) return out;
  for (auto& [name, t] : model->parameters()) out.push_back(t);
  return out;
}

void require_finite(double value, const char* component, std::size_t step) {
  if (!std::isfinite(value)) {
    throw NumericError("non-finite " + std::string(component) + " at step " +
                       std::to_string(step));
  }
}

Tensor accumulate(const Tensor& acc, const Tensor& term) {
  return acc.defined() ? add(acc, term) : term;
}

}  // namespace

std::string_view mode_name(TrainMode mode) {
  return mode == TrainMode::joint ? "joint" : "pretrain_fixed_teacher";
}

TrainMode parse_mode(std::string_view name) {
  if (name == "joint") return TrainMode::joint;
  if (name == "pretrain_fixed_teacher") return TrainMode::pretrain_fixed_teacher;
  throw ConfigError("unknown training mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (k == 0) throw ConfigError("wait-k needs k >= 1");
}

std::string metrics_row(const StepMetrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g,%.10g", m.step,
                m.loss_student, m.loss_teacher, m.loss_distill, m.grad_norm);
  return buf;
}

void write_metrics_csv(std::ostream& out, std::span<const StepMetrics> rows) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) out << metrics_row(r) << '\n';
}

LossTerms total_loss(const Tensor& student_logits, const Tensor& teacher_logits,
                     std::span<const TokenId> targets, const Tensor& z_incr,
                     const Tensor& z_full, double lambda,
                     std::span<const std::uint8_t> keep) {
  if (z_incr.shape() != z_full.shape()) {
    throw DimensionError("encoder states " + shape_string(z_incr.shape()) +
                         " vs " + shape_string(z_full.shape()));
  }
  LossTerms terms;
  terms.student = cross_entropy(student_logits, targets, kPad);
  terms.total = terms.student;
  if (teacher_logits.defined()) {
    terms.teacher = cross_entropy(teacher_logits, targets, kPad);
    terms.total = add(terms.total, terms.teacher);
  }
  terms.distill = l2_distance_loss(z_incr, z_full, keep);
  terms.total = add(terms.total, scale(terms.distill, lambda));
  return terms;
}

// --- optimiser ---------------------------------------------------------------------

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
      eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.requires_grad()) continue;
    const auto g = p.grad();
    auto w = p.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      w[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

double gradient_norm(std::span<const Tensor> params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.requires_grad()) continue;
    for (double g : p.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

// --- trainer --------------------------------------------------------------------------

Trainer::Trainer(TransformerModel& student, TransformerModel* teacher,
                 const TrainConfig& config,
                 std::span<const ParallelExample> data)
    : student_(student),
      teacher_(config.use_teacher ? teacher : nullptr),
      config_(config),
      data_(data),
      student_opt_(trainable(&student), config.lr, config.beta1, config.beta2,
                   config.eps),
      teacher_opt_(trainable(teacher_), config.lr, config.beta1, config.beta2,
                   config.eps) {
  config_.validate();
  if (data_.empty()) throw ConfigError("training set is empty");
  if (student.variant() == ModelVariant::teacher) {
    throw ConfigError("the student must be a wait-k variant");
  }
  if (config_.use_teacher) {
    if (!teacher_) throw ConfigError("teacher model required");
    if (teacher_->variant() != ModelVariant::teacher) {
      throw ConfigError("teacher model must use the bidirectional variant");
    }
    if (teacher_->config().src_vocab != student.config().src_vocab ||
        teacher_->config().d_model != student.config().d_model) {
      throw ConfigError("teacher and student must share source vocabulary and "
                        "d_model");
    }
  }
}

std::vector<std::size_t> Trainer::next_batch() {
  if (cursor_ >= batches_.size()) {
    batches_ = make_batches(data_, config_.batch_size, config_.seed + epoch_++);
    cursor_ = 0;
  }
  return batches_[cursor_++].indices;
}

StepMetrics Trainer::train_step(std::span<const std::size_t> batch) {
  if (batch.empty()) throw ContractError("empty batch");
  const bool joint = teacher_ && config_.mode == TrainMode::joint;
  const bool distill = teacher_ != nullptr;
  std::size_t tgt_tokens = 0, src_tokens = 0;
  for (std::size_t i : batch) {
    tgt_tokens += data_[i].tgt.size() + 1;
    src_tokens += data_[i].src.size();
  }

  student_.zero_grad();
  if (teacher_) teacher_->zero_grad();
  Tape tape;
  TapeScope scope(&tape);
  Tensor total;
  double ce_s = 0.0, ce_t = 0.0, l2 = 0.0;
  for (std::size_t i : batch) {
    const ParallelExample& ex = data_[i];
    const auto dec_in = decoder_input_for(ex.tgt);
    const auto targets = decoder_targets_for(ex.tgt);
    const double w_tgt = static_cast<double>(targets.size()) /
                         static_cast<double>(tgt_tokens);
    const double w_src = static_cast<double>(ex.src.size()) /
                         static_cast<double>(src_tokens);
    const WaitKSchedule sched(config_.k, ex.src.size());
    ForwardResult fs = forward_student(student_, ex.src, dec_in, sched);
    Tensor s_term = scale(cross_entropy(fs.logits, targets, kPad), w_tgt);
    ce_s += s_term.item();
    total = accumulate(total, s_term);
    if (!distill) continue;

    Tensor z_full;
    if (joint) {
      ForwardResult ft = forward_teacher(*teacher_, ex.src, dec_in);
      Tensor t_term = scale(cross_entropy(ft.logits, targets, kPad), w_tgt);
      ce_t += t_term.item();
      total = add(total, t_term);
      z_full = config_.distill_into_teacher ? ft.encoder.z : ft.encoder.z.detach();
    } else {
      z_full = encode_bidirectional(*teacher_, ex.src).z.detach();
    }
    if (config_.lambda > 0.0) {
      Tensor d_term = scale(l2_distance_loss(fs.encoder.z, z_full), w_src);
      l2 += d_term.item();
      total = add(total, scale(d_term, config_.lambda));
    } else {
      l2 += w_src * l2_distance_loss(fs.encoder.z.detach(), z_full.detach()).item();
    }
  }
  ++step_;
  require_finite(ce_s, "loss_student", step_);
  require_finite(ce_t, "loss_teacher", step_);
  require_finite(l2, "loss_distill", step_);
  tape.backward(total);

  std::vector<Tensor> params = trainable(&student_);
  if (joint) {
    auto tp = trainable(teacher_);
    params.insert(params.end(), tp.begin(), tp.end());
  }
  const double norm = gradient_norm(params);
  require_finite(norm, "grad_norm", step_);
  student_opt_.step();
  if (joint) teacher_opt_.step();
  return {step_, ce_s, ce_t, l2, norm};
}

StepMetrics Trainer::pretrain_step(std::span<const std::size_t> batch) {
  if (!teacher_) throw StateError("pretraining needs a teacher");
  if (batch.empty()) throw ContractError("empty batch");
  std::size_t tgt_tokens = 0;
  for (std::size_t i : batch) tgt_tokens += data_[i].tgt.size() + 1;
  teacher_->zero_grad();
  Tape tape;
  TapeScope scope(&tape);
  Tensor total;
  double ce_t = 0.0;
  for (std::size_t i : batch) {
    const ParallelExample& ex = data_[i];
    const auto dec_in = decoder_input_for(ex.tgt);
    const auto targets = decoder_targets_for(ex.tgt);
    ForwardResult ft = forward_teacher(*teacher_, ex.src, dec_in);
    Tensor term = scale(cross_entropy(ft.logits, targets, kPad),
                        static_cast<double>(targets.size()) /
                            static_cast<double>(tgt_tokens));
    ce_t += term.item();
    total = accumulate(total, term);
  }
  ++step_;
  require_finite(ce_t, "loss_teacher", step_);
  tape.backward(total);
  const auto params = trainable(teacher_);
  const double norm = gradient_norm(params);
  require_finite(norm, "grad_norm", step_);
  teacher_opt_.step();
  return {step_, 0.0, ce_t, 0.0, norm};
}

std::vector<StepMetrics> Trainer::run(
    const std::function<void(const StepMetrics&)>& on_step) {
  std::vector<StepMetrics> log;
  auto record = [&](const StepMetrics& m) {
    log.push_back(m);
    if (on_step) on_step(m);
  };
  const bool pretrain = teacher_ && config_.mode == TrainMode::pretrain_fixed_teacher;
  if (pretrain) {
    for (std::size_t s = 0; s < config_.pretrain_steps; ++s) {
      record(pretrain_step(next_batch()));
    }
    teacher_->set_trainable(false);
  }
  for (std::size_t s = 0; s < config_.max_steps; ++s) {
    record(train_step(next_batch()));
  }
  if (pretrain) teacher_->set_trainable(true);
  return log;
}

}  // namespace simulst
