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

// Dense f64 tensors with a reverse-mode tape.
//
// A Tensor is a shared handle to a node holding row-major values and a
// gradient buffer. Operations record a backward closure on the thread's
// active Tape when one is installed (see TapeScope) and at least one input
// requires a gradient; otherwise they only compute values.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace simulst {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

namespace detail {
struct TensorNode;
struct TensorAccess;
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  // Product of all but the last extent; 1 for rank-1 tensors.
  std::size_t rows() const;
  // Last extent.
  std::size_t cols() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  std::span<const double> grad() const;
  std::span<double> mutable_grad();

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;
  void zero_grad();

  double item() const;
  double at(std::size_t row, std::size_t col) const;
  double operator[](std::size_t flat) const { return values()[flat]; }

  // Value copy cut off from the tape.
  Tensor detach() const;

  const detail::TensorNode* id() const noexcept { return node_.get(); }

 private:
  friend struct detail::TensorAccess;
  explicit Tensor(std::shared_ptr<detail::TensorNode> node)
      : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;
};

class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(const Tensor& output, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and replays the recorded rules in reverse.
  // Non-leaf gradients are reset first so that a second call adds exactly
  // one more copy of the gradient to every leaf.
  void backward(const Tensor& loss);

  void clear();
  std::size_t size() const noexcept { return entries_.size(); }
  // Number of rules executed by the most recent backward().
  std::size_t last_visit_count() const noexcept { return last_visits_; }

 private:
  struct Entry {
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
  std::size_t last_visits_ = 0;
};

// Thread-local active tape, or nullptr when recording is disabled.
Tape* active_tape() noexcept;

// Installs a tape (or nullptr to disable recording) for the current scope.
class TapeScope {
 public:
  explicit TapeScope(Tape* tape) noexcept;
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Multiply-accumulate tally of every forward matrix product on this thread.
namespace mac_counter {
std::uint64_t value() noexcept;
void reset() noexcept;
void add(std::uint64_t macs) noexcept;
}  // namespace mac_counter

// Boolean visibility matrix. A single-row mask broadcasts over all rows.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t rows, std::size_t cols, bool fill);

  static Mask causal(std::size_t n);
  // Row r keeps columns [0, visible[r]).
  static Mask prefix(std::span<const std::size_t> visible, std::size_t cols);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool keep(std::size_t row, std::size_t col) const {
    return bits_[(rows_ == 1 ? 0 : row) * cols_ + col] != 0;
  }
  void set(std::size_t row, std::size_t col, bool value) {
    bits_[row * cols_ + col] = value ? 1 : 0;
  }
  bool operator==(const Mask& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Additive constant applied to masked scores before normalisation.
inline constexpr double kMaskedScore = -1e9;
inline constexpr double kLayerNormEpsilon = 1e-5;

// --- differentiable operations -------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// x[m x n] + b[n] broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);
// x[m x n] + c[m] broadcast over columns.
Tensor add_column(const Tensor& x, const Tensor& column);
Tensor relu(const Tensor& x);
Tensor sum(const Tensor& x);
// Per-row sum of a[m x n] * b[m x n], shape [m].
Tensor row_dot(const Tensor& a, const Tensor& b);

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);
// Rows at index >= keep are replaced by zeros.
Tensor zero_rows_from(const Tensor& a, std::size_t keep);

// table[V x d] indexed by ids; backward scatter-adds into the table.
Tensor embedding(const Tensor& table, std::span<const std::uint32_t> ids);

Tensor masked_softmax(const Tensor& scores, const Mask& mask);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

// Mean negative log-likelihood over positions whose target differs from
// ignore_index. Returns 0 if every position is ignored.
Tensor cross_entropy(const Tensor& logits,
                     std::span<const std::uint32_t> targets,
                     std::uint32_t ignore_index = UINT32_MAX);

// (1/n) * sum_i ||a_i - b_i||^2 over kept rows (all rows when keep is empty).
Tensor l2_distance_loss(const Tensor& a, const Tensor& b,
                        std::span<const std::uint8_t> keep = {});

// Row i of the result is the mean of rows 0..i of x, computed as a
// lower-triangular 0/1 mask product followed by division by i+1.
Tensor masked_cumulative_mean(const Tensor& x);

// out[i][j] = f[i] + z[j] for j <= i, zero otherwise. Shape {n, n, d}.
Tensor ael_expand(const Tensor& f, const Tensor& z);

}  // namespace simulst
