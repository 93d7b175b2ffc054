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

#include "simulst/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "simulst/errors.hpp"

namespace simulst {

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // sized on first use
  bool requires_grad = false;
  bool leaf = true;

  std::vector<double>& grad_buffer() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    return grad;
  }
};

struct TensorAccess {
  static const std::shared_ptr<TensorNode>& node(const Tensor& t) {
    return t.node_;
  }
  static Tensor wrap(std::shared_ptr<TensorNode> node) {
    return Tensor(std::move(node));
  }
};

}  // namespace detail

namespace {

using detail::TensorAccess;
using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

thread_local Tape* g_active_tape = nullptr;
thread_local std::uint64_t g_macs = 0;

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

const NodePtr& node_of(const Tensor& t) {
  const auto& n = TensorAccess::node(t);
  if (!n) throw ContractError("use of an undefined tensor");
  return n;
}

bool tracks(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Creates an op output; when track is set, the output requires grad and the
// rule built by make_rule(out_node) is recorded on the active tape.
template <typename MakeRule>
Tensor emit(Shape shape, std::vector<double> values, bool track,
            MakeRule&& make_rule) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->leaf = false;
  node->requires_grad = track;
  Tensor out = TensorAccess::wrap(node);
  if (track) g_active_tape->record(out, make_rule(node.get()));
  return out;
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " +
                         shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

// c[m x q] += a[m x p] * b[p x q]
// Four interleaved partial sums so the compiler can vectorise the loop
// without reassociating; the summation order is fixed, hence deterministic.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
    s2 += a[j + 2] * b[j + 2];
    s3 += a[j + 3] * b[j + 3];
  }
  for (; j < n; ++j) s0 += a[j] * b[j];
  return (s0 + s1) + (s2 + s3);
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t p, std::size_t q) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * q;
    const double* arow = a + i * p;
    for (std::size_t k = 0; k < p; ++k) {
      const double aik = arow[k];
      const double* brow = b + k * q;
      for (std::size_t j = 0; j < q; ++j) crow[j] += aik * brow[j];
    }
  }
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// --- Tensor ----------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.empty()) shape = {1};
  for (std::size_t e : shape) {
    if (e == 0) throw DimensionError("zero extent in " + shape_string(shape));
  }
  if (product(shape) != values.size()) {
    throw DimensionError("shape " + shape_string(shape) + " holds " +
                         std::to_string(product(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  node_ = std::make_shared<detail::TensorNode>();
  node_->shape = std::move(shape);
  node_->values = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values, bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return node_of(*this)->shape; }
std::size_t Tensor::numel() const { return node_of(*this)->values.size(); }

std::size_t Tensor::rows() const {
  const Shape& s = shape();
  return product(Shape(s.begin(), s.end() - 1));
}

std::size_t Tensor::cols() const { return shape().back(); }

std::span<const double> Tensor::values() const {
  return node_of(*this)->values;
}

std::span<double> Tensor::mutable_values() { return node_of(*this)->values; }

std::span<const double> Tensor::grad() const {
  return node_of(*this)->grad_buffer();
}

std::span<double> Tensor::mutable_grad() {
  return node_of(*this)->grad_buffer();
}

bool Tensor::requires_grad() const { return node_of(*this)->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  node_of(*this)->requires_grad = flag;
}

bool Tensor::is_leaf() const { return node_of(*this)->leaf; }

void Tensor::zero_grad() {
  auto& g = node_of(*this)->grad_buffer();
  std::fill(g.begin(), g.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("item() on non-scalar " + shape_string(shape()));
  }
  return values()[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return values()[row * cols() + col];
}

Tensor Tensor::detach() const {
  return Tensor(shape(), std::vector<double>(values().begin(), values().end()));
}

// --- Tape --------------------------------------------------------------------

void Tape::record(const Tensor& output, BackwardFn backward) {
  entries_.push_back({output, std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got " +
                        shape_string(loss.shape()));
  }
  for (auto& e : entries_) {
    auto& g = TensorAccess::node(e.output)->grad_buffer();
    std::fill(g.begin(), g.end(), 0.0);
  }
  const auto& loss_node = node_of(loss);
  if (!loss_node->requires_grad) {
    throw ContractError("backward() on a loss that was not recorded");
  }
  loss_node->grad_buffer()[0] += 1.0;
  last_visits_ = 0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    it->backward();
    ++last_visits_;
  }
}

void Tape::clear() {
  entries_.clear();
  last_visits_ = 0;
}

Tape* active_tape() noexcept { return g_active_tape; }

TapeScope::TapeScope(Tape* tape) noexcept : previous_(g_active_tape) {
  g_active_tape = tape;
}

TapeScope::~TapeScope() { g_active_tape = previous_; }

namespace mac_counter {
std::uint64_t value() noexcept { return g_macs; }
void reset() noexcept { g_macs = 0; }
void add(std::uint64_t macs) noexcept { g_macs += macs; }
}  // namespace mac_counter

// --- Mask --------------------------------------------------------------------

Mask::Mask(std::size_t rows, std::size_t cols, bool fill)
    : rows_(rows), cols_(cols), bits_(rows * cols, fill ? 1 : 0) {}

Mask Mask::causal(std::size_t n) {
  Mask m(n, n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) m.set(i, j, true);
  }
  return m;
}

Mask Mask::prefix(std::span<const std::size_t> visible, std::size_t cols) {
  Mask m(visible.size(), cols, false);
  for (std::size_t r = 0; r < visible.size(); ++r) {
    for (std::size_t j = 0; j < std::min(visible[r], cols); ++j) {
      m.set(r, j, true);
    }
  }
  return m;
}

// --- operations --------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.shape()[0], p = a.shape()[1], q = b.shape()[1];
  if (b.shape()[0] != p) {
    throw DimensionError("matmul inner dimensions differ: " +
                         shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(m * q, 0.0);
  gemm_nn(a.values().data(), b.values().data(), out.data(), m, p, q);
  mac_counter::add(static_cast<std::uint64_t>(m) * p * q);
  const bool track = tracks({&a, &b});
  return emit({m, q}, std::move(out), track, [&](TensorNode* o) {
    return [o, an = node_of(a), bn = node_of(b), m, p, q]() {
      const double* dc = o->grad.data();
      if (an->requires_grad) {
        // dA[i,k] += sum_j dC[i,j] * B[k,j]
        double* da = an->grad_buffer().data();
        const double* bv = bn->values.data();
        for (std::size_t i = 0; i < m; ++i) {
          const double* dci = dc + i * q;
          for (std::size_t k = 0; k < p; ++k) {
            da[i * p + k] += dot(dci, bv + k * q, q);
          }
        }
      }
      if (bn->requires_grad) {
        // dB[k,j] += sum_i A[i,k] * dC[i,j]
        double* db = bn->grad_buffer().data();
        const double* av = an->values.data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t k = 0; k < p; ++k) {
            const double aik = av[i * p + k];
            for (std::size_t j = 0; j < q; ++j) {
              db[k * q + j] += aik * dc[i * q + j];
            }
          }
        }
      }
    };
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(m * n);
  const auto v = a.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = v[i * n + j];
  }
  return emit({n, m}, std::move(out), tracks({&a}), [&](TensorNode* o) {
    return [o, an = node_of(a), m, n]() {
      double* da = an->grad_buffer().data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) da[i * n + j] += o->grad[j * m + i];
      }
    };
  });
}

namespace {

template <typename Fwd, typename GradA, typename GradB>
Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* name,
                          Fwd fwd, GradA grad_a, GradB grad_b) {
  require_same_shape(a, b, name);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  return emit(a.shape(), std::move(out), tracks({&a, &b}), [&](TensorNode* o) {
    return [o, an = node_of(a), bn = node_of(b), grad_a, grad_b]() {
      const std::size_t n = o->values.size();
      if (an->requires_grad) {
        auto& da = an->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) {
          da[i] += grad_a(an->values[i], bn->values[i]) * o->grad[i];
        }
      }
      if (bn->requires_grad) {
        auto& db = bn->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) {
          db[i] += grad_b(an->values[i], bn->values[i]) * o->grad[i];
        }
      }
    };
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return emit(a.shape(), std::move(out), tracks({&a}), [&](TensorNode* o) {
    return [o, an = node_of(a), factor]() {
      auto& da = an->grad_buffer();
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += factor * o->grad[i];
    };
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t n = x.cols();
  if (bias.numel() != n) {
    throw DimensionError("add_bias: " + shape_string(x.shape()) + " vs bias " +
                         shape_string(bias.shape()));
  }
  const std::size_t m = x.rows();
  const auto xv = x.values();
  const auto bv = bias.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
  }
  return emit(x.shape(), std::move(out), tracks({&x, &bias}),
              [&](TensorNode* o) {
                return [o, xn = node_of(x), bn = node_of(bias), m, n]() {
                  if (xn->requires_grad) {
                    auto& dx = xn->grad_buffer();
                    for (std::size_t i = 0; i < m * n; ++i) dx[i] += o->grad[i];
                  }
                  if (bn->requires_grad) {
                    auto& db = bn->grad_buffer();
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t j = 0; j < n; ++j) {
                        db[j] += o->grad[i * n + j];
                      }
                    }
                  }
                };
              });
}

Tensor add_column(const Tensor& x, const Tensor& column) {
  const std::size_t m = x.rows(), n = x.cols();
  if (column.numel() != m) {
    throw DimensionError("add_column: " + shape_string(x.shape()) +
                         " vs column " + shape_string(column.shape()));
  }
  const auto xv = x.values();
  const auto cv = column.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + cv[i];
  }
  return emit(x.shape(), std::move(out), tracks({&x, &column}),
              [&](TensorNode* o) {
                return [o, xn = node_of(x), cn = node_of(column), m, n]() {
                  if (xn->requires_grad) {
                    auto& dx = xn->grad_buffer();
                    for (std::size_t i = 0; i < m * n; ++i) dx[i] += o->grad[i];
                  }
                  if (cn->requires_grad) {
                    auto& dcol = cn->grad_buffer();
                    for (std::size_t i = 0; i < m; ++i) {
                      double acc = 0.0;
                      for (std::size_t j = 0; j < n; ++j) acc += o->grad[i * n + j];
                      dcol[i] += acc;
                    }
                  }
                };
              });
}

Tensor relu(const Tensor& x) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return emit(x.shape(), std::move(out), tracks({&x}), [&](TensorNode* o) {
    return [o, xn = node_of(x)]() {
      auto& dx = xn->grad_buffer();
      for (std::size_t i = 0; i < dx.size(); ++i) {
        if (xn->values[i] > 0.0) dx[i] += o->grad[i];
      }
    };
  });
}

Tensor sum(const Tensor& x) {
  const auto xv = x.values();
  double total = 0.0;
  for (double v : xv) total += v;
  return emit({1}, {total}, tracks({&x}), [&](TensorNode* o) {
    return [o, xn = node_of(x)]() {
      auto& dx = xn->grad_buffer();
      for (double& d : dx) d += o->grad[0];
    };
  });
}

Tensor row_dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "row_dot");
  const std::size_t m = a.rows(), n = a.cols();
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += av[i * n + j] * bv[i * n + j];
    out[i] = acc;
  }
  return emit({m}, std::move(out), tracks({&a, &b}), [&](TensorNode* o) {
    return [o, an = node_of(a), bn = node_of(b), m, n]() {
      if (an->requires_grad) {
        auto& da = an->grad_buffer();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            da[i * n + j] += bn->values[i * n + j] * o->grad[i];
          }
        }
      }
      if (bn->requires_grad) {
        auto& db = bn->grad_buffer();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            db[i * n + j] += an->values[i * n + j] * o->grad[i];
          }
        }
      }
    };
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add_bias(matmul(x, weight), bias);
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows of nothing");
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  bool track = false;
  for (const Tensor& p : parts) {
    if (p.cols() != n) {
      throw DimensionError("concat_rows: " + shape_string(parts[0].shape()) +
                           " vs " + shape_string(p.shape()));
    }
    total += p.rows();
    track = track || tracks({&p});
  }
  std::vector<double> out;
  out.reserve(total * n);
  std::vector<NodePtr> nodes;
  for (const Tensor& p : parts) {
    out.insert(out.end(), p.values().begin(), p.values().end());
    nodes.push_back(node_of(p));
  }
  return emit({total, n}, std::move(out), track, [&](TensorNode* o) {
    return [o, nodes = std::move(nodes)]() {
      std::size_t offset = 0;
      for (const auto& pn : nodes) {
        const std::size_t len = pn->values.size();
        if (pn->requires_grad) {
          auto& d = pn->grad_buffer();
          for (std::size_t i = 0; i < len; ++i) d[i] += o->grad[offset + i];
        }
        offset += len;
      }
    };
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols of nothing");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  bool track = false;
  for (const Tensor& p : parts) {
    if (p.rows() != m || p.rank() != 2) {
      throw DimensionError("concat_cols: " + shape_string(parts[0].shape()) +
                           " vs " + shape_string(p.shape()));
    }
    total += p.cols();
    track = track || tracks({&p});
  }
  std::vector<double> out(m * total);
  std::vector<NodePtr> nodes;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.cols();
    const auto pv = p.values();
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(pv.data() + i * w, w, out.data() + i * total + offset);
    }
    offset += w;
    nodes.push_back(node_of(p));
  }
  return emit({m, total}, std::move(out), track, [&](TensorNode* o) {
    return [o, nodes = std::move(nodes), m, total]() {
      std::size_t off = 0;
      for (const auto& pn : nodes) {
        const std::size_t w = pn->shape.back();
        if (pn->requires_grad) {
          auto& d = pn->grad_buffer();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
              d[i * w + j] += o->grad[i * total + off + j];
            }
          }
        }
        off += w;
      }
    };
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_matrix(a, "slice_rows");
  const std::size_t n = a.cols();
  if (begin >= end || end > a.rows()) {
    throw IndexError("slice_rows [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") of " + shape_string(a.shape()));
  }
  const auto av = a.values();
  std::vector<double> out(av.begin() + begin * n, av.begin() + end * n);
  return emit({end - begin, n}, std::move(out), tracks({&a}),
              [&](TensorNode* o) {
                return [o, an = node_of(a), begin, n]() {
                  auto& d = an->grad_buffer();
                  for (std::size_t i = 0; i < o->grad.size(); ++i) {
                    d[begin * n + i] += o->grad[i];
                  }
                };
              });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_matrix(a, "slice_cols");
  const std::size_t m = a.rows(), n = a.cols();
  if (begin >= end || end > n) {
    throw IndexError("slice_cols [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") of " + shape_string(a.shape()));
  }
  const std::size_t w = end - begin;
  const auto av = a.values();
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(av.data() + i * n + begin, w, out.data() + i * w);
  }
  return emit({m, w}, std::move(out), tracks({&a}), [&](TensorNode* o) {
    return [o, an = node_of(a), m, n, w, begin]() {
      auto& d = an->grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          d[i * n + begin + j] += o->grad[i * w + j];
        }
      }
    };
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  const std::size_t m = a.rows(), n = a.cols();
  if (rows.empty()) throw ContractError("gather_rows with no indices");
  std::vector<double> out(rows.size() * n);
  const auto av = a.values();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= m) {
      throw IndexError("gather_rows index " + std::to_string(rows[r]) +
                       " of " + shape_string(a.shape()));
    }
    std::copy_n(av.data() + rows[r] * n, n, out.data() + r * n);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return emit({rows.size(), n}, std::move(out), tracks({&a}),
              [&](TensorNode* o) {
                return [o, an = node_of(a), idx = std::move(idx), n]() {
                  auto& d = an->grad_buffer();
                  for (std::size_t r = 0; r < idx.size(); ++r) {
                    for (std::size_t j = 0; j < n; ++j) {
                      d[idx[r] * n + j] += o->grad[r * n + j];
                    }
                  }
                };
              });
}

Tensor zero_rows_from(const Tensor& a, std::size_t keep) {
  require_matrix(a, "zero_rows_from");
  const std::size_t n = a.cols();
  const std::size_t cut = std::min(keep, a.rows()) * n;
  std::vector<double> out(a.values().begin(), a.values().end());
  std::fill(out.begin() + cut, out.end(), 0.0);
  return emit(a.shape(), std::move(out), tracks({&a}), [&](TensorNode* o) {
    return [o, an = node_of(a), cut]() {
      auto& d = an->grad_buffer();
      for (std::size_t i = 0; i < cut; ++i) d[i] += o->grad[i];
    };
  });
}

Tensor embedding(const Tensor& table, std::span<const std::uint32_t> ids) {
  require_matrix(table, "embedding");
  const std::size_t vocab = table.rows(), d = table.cols();
  if (ids.empty()) throw ContractError("embedding of an empty sequence");
  std::vector<double> out(ids.size() * d);
  const auto tv = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab) {
      throw IndexError("token id " + std::to_string(ids[i]) +
                       " outside vocabulary of " + std::to_string(vocab));
    }
    std::copy_n(tv.data() + ids[i] * d, d, out.data() + i * d);
  }
  std::vector<std::uint32_t> idv(ids.begin(), ids.end());
  return emit({ids.size(), d}, std::move(out), tracks({&table}),
              [&](TensorNode* o) {
                return [o, tn = node_of(table), idv = std::move(idv), d]() {
                  auto& g = tn->grad_buffer();
                  for (std::size_t i = 0; i < idv.size(); ++i) {
                    for (std::size_t j = 0; j < d; ++j) {
                      g[idv[i] * d + j] += o->grad[i * d + j];
                    }
                  }
                };
              });
}

Tensor masked_softmax(const Tensor& scores, const Mask& mask) {
  const std::size_t m = scores.rows(), n = scores.cols();
  if (mask.cols() != n || (mask.rows() != 1 && mask.rows() != m)) {
    throw DimensionError("mask " + std::to_string(mask.rows()) + "x" +
                         std::to_string(mask.cols()) +
                         " does not broadcast to scores " +
                         shape_string(scores.shape()));
  }
  const auto sv = scores.values();
  std::vector<double> out(m * n, 0.0);
  std::vector<double> shifted(n);
  for (std::size_t i = 0; i < m; ++i) {
    bool any = false;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      const bool keep = mask.keep(i, j);
      any = any || keep;
      shifted[j] = keep ? sv[i * n + j] : sv[i * n + j] + kMaskedScore;
      best = std::max(best, shifted[j]);
    }
    if (!any) continue;  // fully masked row stays exactly zero
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = std::exp(shifted[j] - best);
      out[i * n + j] = e;
      total += e;
    }
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = mask.keep(i, j) ? out[i * n + j] / total : 0.0;
    }
  }
  return emit(scores.shape(), std::move(out), tracks({&scores}),
              [&](TensorNode* o) {
                return [o, sn = node_of(scores), m, n]() {
                  auto& ds = sn->grad_buffer();
                  for (std::size_t i = 0; i < m; ++i) {
                    const double* y = o->values.data() + i * n;
                    const double* dy = o->grad.data() + i * n;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < n; ++j) dot += y[j] * dy[j];
                    for (std::size_t j = 0; j < n; ++j) {
                      ds[i * n + j] += y[j] * (dy[j] - dot);
                    }
                  }
                };
              });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  const std::size_t m = x.rows(), d = x.cols();
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm: " + shape_string(x.shape()) +
                         " with gain " + shape_string(gain.shape()) +
                         " and bias " + shape_string(bias.shape()));
  }
  const auto xv = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  std::vector<double> out(m * d);
  std::vector<double> xhat(m * d);
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xv[i * d + j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xv[i * d + j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (xv[i * d + j] - mean) * inv_std[i];
      out[i * d + j] = xhat[i * d + j] * gv[j] + bv[j];
    }
  }
  return emit(
      x.shape(), std::move(out), tracks({&x, &gain, &bias}),
      [&](TensorNode* o) {
        return [o, xn = node_of(x), gn = node_of(gain), bn = node_of(bias), m,
                d, xhat = std::move(xhat), inv_std = std::move(inv_std)]() {
          const double* dy = o->grad.data();
          if (gn->requires_grad || bn->requires_grad) {
            auto& dg = gn->grad_buffer();
            auto& db = bn->grad_buffer();
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t j = 0; j < d; ++j) {
                if (gn->requires_grad) dg[j] += dy[i * d + j] * xhat[i * d + j];
                if (bn->requires_grad) db[j] += dy[i * d + j];
              }
            }
          }
          if (xn->requires_grad) {
            auto& dx = xn->grad_buffer();
            const double inv_d = 1.0 / static_cast<double>(d);
            for (std::size_t i = 0; i < m; ++i) {
              double mean_g = 0.0, mean_gx = 0.0;
              for (std::size_t j = 0; j < d; ++j) {
                const double g = dy[i * d + j] * gn->values[j];
                mean_g += g;
                mean_gx += g * xhat[i * d + j];
              }
              mean_g *= inv_d;
              mean_gx *= inv_d;
              for (std::size_t j = 0; j < d; ++j) {
                const double g = dy[i * d + j] * gn->values[j];
                dx[i * d + j] +=
                    inv_std[i] * (g - mean_g - xhat[i * d + j] * mean_gx);
              }
            }
          }
        };
      });
}

Tensor cross_entropy(const Tensor& logits,
                     std::span<const std::uint32_t> targets,
                     std::uint32_t ignore_index) {
  const std::size_t t_len = logits.rows(), vocab = logits.cols();
  if (targets.size() != t_len) {
    throw DimensionError("cross_entropy: logits " +
                         shape_string(logits.shape()) + " vs " +
                         std::to_string(targets.size()) + " targets");
  }
  const auto lv = logits.values();
  std::vector<double> probs(t_len * vocab, 0.0);
  std::size_t kept = 0;
  double total = 0.0;
  for (std::size_t t = 0; t < t_len; ++t) {
    if (targets[t] == ignore_index) continue;
    if (targets[t] >= vocab) {
      throw IndexError("target id " + std::to_string(targets[t]) +
                       " outside vocabulary of " + std::to_string(vocab));
    }
    const double* row = lv.data() + t * vocab;
    const double best = *std::max_element(row, row + vocab);
    double z = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) {
      probs[t * vocab + v] = std::exp(row[v] - best);
      z += probs[t * vocab + v];
    }
    for (std::size_t v = 0; v < vocab; ++v) probs[t * vocab + v] /= z;
    total += -(row[targets[t]] - best - std::log(z));
    ++kept;
  }
  const double loss = kept ? total / static_cast<double>(kept) : 0.0;
  std::vector<std::uint32_t> tv(targets.begin(), targets.end());
  return emit({1}, {loss}, tracks({&logits}) && kept > 0, [&](TensorNode* o) {
    return [o, ln = node_of(logits), probs = std::move(probs),
            tv = std::move(tv), vocab, kept, ignore_index]() {
      auto& dl = ln->grad_buffer();
      const double w = o->grad[0] / static_cast<double>(kept);
      for (std::size_t t = 0; t < tv.size(); ++t) {
        if (tv[t] == ignore_index) continue;
        for (std::size_t v = 0; v < vocab; ++v) {
          dl[t * vocab + v] += w * probs[t * vocab + v];
        }
        dl[t * vocab + tv[t]] -= w;
      }
    };
  });
}

Tensor l2_distance_loss(const Tensor& a, const Tensor& b,
                        std::span<const std::uint8_t> keep) {
  require_same_shape(a, b, "l2_distance_loss");
  const std::size_t n = a.rows(), d = a.cols();
  if (!keep.empty() && keep.size() != n) {
    throw DimensionError("l2_distance_loss row mask of " +
                         std::to_string(keep.size()) + " for " +
                         std::to_string(n) + " rows");
  }
  std::vector<std::uint8_t> rows(n, 1);
  if (!keep.empty()) rows.assign(keep.begin(), keep.end());
  const auto av = a.values();
  const auto bv = b.values();
  std::size_t kept = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!rows[i]) continue;
    ++kept;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = av[i * d + j] - bv[i * d + j];
      total += diff * diff;
    }
  }
  const double loss = kept ? total / static_cast<double>(kept) : 0.0;
  return emit({1}, {loss}, tracks({&a, &b}) && kept > 0, [&](TensorNode* o) {
    return [o, an = node_of(a), bn = node_of(b), rows = std::move(rows), n, d,
            kept]() {
      const double w = 2.0 * o->grad[0] / static_cast<double>(kept);
      for (std::size_t i = 0; i < n; ++i) {
        if (!rows[i]) continue;
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = an->values[i * d + j] - bn->values[i * d + j];
          if (an->requires_grad) an->grad_buffer()[i * d + j] += w * diff;
          if (bn->requires_grad) bn->grad_buffer()[i * d + j] -= w * diff;
        }
      }
    };
  });
}

Tensor masked_cumulative_mean(const Tensor& x) {
  require_matrix(x, "masked_cumulative_mean");
  const std::size_t n = x.rows();
  std::vector<double> lower(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) lower[i * n + j] = 1.0;
  }
  Tensor sums = matmul(Tensor::matrix(n, n, std::move(lower)), x);
  std::vector<double> inv(n);
  for (std::size_t i = 0; i < n; ++i) inv[i] = static_cast<double>(i + 1);
  // Division (not reciprocal multiplication) so the streaming running mean
  // reproduces each row bit for bit.
  const std::size_t d = x.cols();
  const auto sv = sums.values();
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = sv[i * d + j] / inv[i];
  }
  return emit(x.shape(), std::move(out), tracks({&sums}), [&](TensorNode* o) {
    return [o, sn = node_of(sums), inv = std::move(inv), d]() {
      auto& ds = sn->grad_buffer();
      for (std::size_t i = 0; i < inv.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          ds[i * d + j] += o->grad[i * d + j] / inv[i];
        }
      }
    };
  });
}

Tensor ael_expand(const Tensor& f, const Tensor& z) {
  require_matrix(f, "ael_expand");
  require_same_shape(f, z, "ael_expand");
  const std::size_t n = f.rows(), d = f.cols();
  const auto fv = f.values();
  const auto zv = z.values();
  std::vector<double> out(n * n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double* dst = out.data() + (i * n + j) * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] = fv[i * d + c] + zv[j * d + c];
    }
  }
  return emit({n, n, d}, std::move(out), tracks({&f, &z}), [&](TensorNode* o) {
    return [o, fn = node_of(f), zn = node_of(z), n, d]() {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
          const double* g = o->grad.data() + (i * n + j) * d;
          if (fn->requires_grad) {
            auto& df = fn->grad_buffer();
            for (std::size_t c = 0; c < d; ++c) df[i * d + c] += g[c];
          }
          if (zn->requires_grad) {
            auto& dz = zn->grad_buffer();
            for (std::size_t c = 0; c < d; ++c) dz[j * d + c] += g[c];
          }
        }
      }
    };
  });
}

}  // namespace simulst
