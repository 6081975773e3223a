// Copyright 2026 The nrvc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// A Var is a handle to a graph node holding a value and, after backward(), a
// gradient. Every op records a closure that pushes the node's gradient into
// its parents. Rows are time frames and columns are channels throughout the
// model code, so "row" broadcasting means per-channel parameters.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <unordered_set>
#include <vector>

#include "nrvc/common.hpp"

namespace nrvc::ag {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// While a NoGradGuard is alive on this thread, ops record no graph.
inline bool& grad_mode_enabled() {
  thread_local bool enabled = true;
  return enabled;
}

class NoGradGuard {
 public:
  NoGradGuard() : prev_(grad_mode_enabled()) { grad_mode_enabled() = false; }
  ~NoGradGuard() { grad_mode_enabled() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename T>
struct Node {
  Matrix<T> value;
  Matrix<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix<T>& g) {
    if (grad.size() == 0)
      grad = g;
    else
      grad += g;
  }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Matrix<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  bool defined() const { return node_ != nullptr; }
  const Matrix<T>& value() const { return node_->value; }
  Matrix<T>& mutable_value() { return node_->value; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_->requires_grad; }

  /// Gradient after backward(); zeros of the value's shape if none arrived.
  Matrix<T> grad() const {
    if (node_->grad.size() == 0) return Matrix<T>::Zero(rows(), cols());
    return node_->grad;
  }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }

  T scalar() const {
    require(rows() == 1 && cols() == 1, "scalar(): not a 1x1 value");
    return node_->value(0, 0);
  }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

  /// Builds an op node: value, parents, and a gradient closure.
  static Var make(Matrix<T> value, std::vector<Var> parents,
                  std::function<void(Node<T>&)> backward) {
    Var out(std::move(value));
    bool rg = false;
    if (grad_mode_enabled())
      for (auto& p : parents) rg = rg || p.requires_grad();
    out.node_->requires_grad = rg;
    if (rg) {
      for (auto& p : parents) out.node_->parents.push_back(p.node_);
      out.node_->backward = std::move(backward);
    }
    return out;
  }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
Var<T> constant(Matrix<T> v) {
  return Var<T>(std::move(v), false);
}

template <typename T>
Var<T> parameter(Matrix<T> v) {
  return Var<T>(std::move(v), true);
}

/// Seeds d(root)/d(root) = `seed` (ones by default) and propagates to every
/// reachable node that requires a gradient.
template <typename T>
void backward(const Var<T>& root, const Matrix<T>* seed = nullptr) {
  if (!root.requires_grad()) return;
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  // Iterative post-order DFS.
  std::vector<std::pair<Node<T>*, size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node<T>* p = n->parents[i++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  Node<T>& r = *root.node();
  r.accumulate(seed ? *seed : Matrix<T>::Ones(r.value.rows(), r.value.cols()));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>& n = **it;
    if (n.backward && n.grad.size() != 0) n.backward(n);
  }
}

namespace detail {
template <typename T>
void push(const std::shared_ptr<Node<T>>& p, const Matrix<T>& g) {
  if (p->requires_grad) p->accumulate(g);
}
template <typename T>
void check_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          std::string(op) + ": shape mismatch");
}
}  // namespace detail

// ---- elementwise and linear algebra ------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  return Var<T>::make(a.value() * b.value(), {a, b}, [a, b](Node<T>& n) {
    if (a.requires_grad()) detail::push(a.node(), Matrix<T>(n.grad * b.value().transpose()));
    if (b.requires_grad()) detail::push(b.node(), Matrix<T>(a.value().transpose() * n.grad));
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "add");
  return Var<T>::make(a.value() + b.value(), {a, b}, [a, b](Node<T>& n) {
    detail::push(a.node(), n.grad);
    detail::push(b.node(), n.grad);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "sub");
  return Var<T>::make(a.value() - b.value(), {a, b}, [a, b](Node<T>& n) {
    detail::push(a.node(), n.grad);
    detail::push(b.node(), Matrix<T>(-n.grad));
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "mul");
  return Var<T>::make(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Node<T>& n) {
    if (a.requires_grad()) detail::push(a.node(), Matrix<T>(n.grad.cwiseProduct(b.value())));
    if (b.requires_grad()) detail::push(b.node(), Matrix<T>(n.grad.cwiseProduct(a.value())));
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  return Var<T>::make(a.value() * s, {a},
                      [a, s](Node<T>& n) { detail::push(a.node(), Matrix<T>(n.grad * s)); });
}

/// a + row, with `row` (1 x C) broadcast over every row of `a`.
template <typename T>
Var<T> add_row(const Var<T>& a, const Var<T>& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row: row shape mismatch");
  Matrix<T> v = a.value().rowwise() + row.value().row(0);
  return Var<T>::make(std::move(v), {a, row}, [a, row](Node<T>& n) {
    detail::push(a.node(), n.grad);
    if (row.requires_grad()) detail::push(row.node(), Matrix<T>(n.grad.colwise().sum()));
  });
}

/// a * row elementwise, with `row` (1 x C) broadcast over rows.
template <typename T>
Var<T> mul_row(const Var<T>& a, const Var<T>& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "mul_row: row shape mismatch");
  Matrix<T> v = a.value().array().rowwise() * row.value().row(0).array();
  return Var<T>::make(std::move(v), {a, row}, [a, row](Node<T>& n) {
    if (a.requires_grad())
      detail::push(a.node(), Matrix<T>(n.grad.array().rowwise() * row.value().row(0).array()));
    if (row.requires_grad())
      detail::push(row.node(), Matrix<T>(n.grad.cwiseProduct(a.value()).colwise().sum()));
  });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return Var<T>::make(a.value().cwiseMax(T(0)), {a}, [a](Node<T>& n) {
    detail::push(a.node(),
                 Matrix<T>((a.value().array() > T(0)).select(n.grad.array(), T(0))));
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope = T(0.2)) {
  Matrix<T> v = (a.value().array() > T(0)).select(a.value().array(), a.value().array() * slope);
  return Var<T>::make(std::move(v), {a}, [a, slope](Node<T>& n) {
    detail::push(a.node(), Matrix<T>((a.value().array() > T(0))
                                         .select(n.grad.array(), n.grad.array() * slope)));
  });
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  Matrix<T> v = a.value().array().exp();
  return Var<T>::make(v, {a}, [a, v](Node<T>& n) {
    detail::push(a.node(), Matrix<T>(n.grad.cwiseProduct(v)));
  });
}

/// Elementwise clamp; the gradient is passed only where the input was inside
/// [lo, hi].
template <typename T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
  return Var<T>::make(a.value().cwiseMax(lo).cwiseMin(hi), {a}, [a, lo, hi](Node<T>& n) {
    auto inside = (a.value().array() >= lo) && (a.value().array() <= hi);
    detail::push(a.node(), Matrix<T>(inside.select(n.grad.array(), T(0))));
  });
}

/// Mean of |a - b| over all entries, as a 1x1 value.
template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "mean_abs_diff");
  require(a.value().size() > 0, "mean_abs_diff: empty input");
  Matrix<T> d = a.value() - b.value();
  Matrix<T> v(1, 1);
  v(0, 0) = d.cwiseAbs().mean();
  return Var<T>::make(std::move(v), {a, b}, [a, b, d](Node<T>& n) {
    const T g = n.grad(0, 0) / static_cast<T>(d.size());
    Matrix<T> s = d.unaryExpr([g](T x) { return x > T(0) ? g : (x < T(0) ? -g : T(0)); });
    detail::push(a.node(), s);
    if (b.requires_grad()) detail::push(b.node(), Matrix<T>(-s));
  });
}

template <typename T>
Var<T> sum_all(const Var<T>& a) {
  Matrix<T> v(1, 1);
  v(0, 0) = a.value().sum();
  return Var<T>::make(std::move(v), {a}, [a](Node<T>& n) {
    detail::push(a.node(), Matrix<T>(Matrix<T>::Constant(a.rows(), a.cols(), n.grad(0, 0))));
  });
}

template <typename T>
Var<T> mean_all(const Var<T>& a) {
  require(a.value().size() > 0, "mean_all: empty input");
  return scale(sum_all(a), T(1) / static_cast<T>(a.value().size()));
}

/// Column means over rows (temporal average pooling): T x C -> 1 x C.
template <typename T>
Var<T> mean_rows(const Var<T>& a) {
  require(a.rows() > 0, "mean_rows: empty input");
  Matrix<T> v = a.value().colwise().mean();
  return Var<T>::make(std::move(v), {a}, [a](Node<T>& n) {
    Matrix<T> g = n.grad.replicate(a.rows(), 1) / static_cast<T>(a.rows());
    detail::push(a.node(), g);
  });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  Eigen::Index rows = parts[0].rows(), cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix<T> v(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return Var<T>::make(std::move(v), parts, [parts](Node<T>& n) {
    Eigen::Index c0 = 0;
    for (const auto& p : parts) {
      if (p.requires_grad()) detail::push(p.node(), Matrix<T>(n.grad.middleCols(c0, p.cols())));
      c0 += p.cols();
    }
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: out of range");
  return Var<T>::make(a.value().middleCols(start, count), {a}, [a, start, count](Node<T>& n) {
    Matrix<T> g = Matrix<T>::Zero(a.rows(), a.cols());
    g.middleCols(start, count) = n.grad;
    detail::push(a.node(), g);
  });
}

/// Sliding-window unfold for 1-D convolution over rows with replicate
/// padding: row t of the result is [x(t-l), ..., x(t-l+k-1)] with l = (k-1)/2
/// and out-of-range rows clamped to the nearest edge row.
template <typename T>
Var<T> unfold(const Var<T>& x, int kernel) {
  require(kernel >= 1, "unfold: kernel must be positive");
  const Eigen::Index rows = x.rows(), ch = x.cols();
  require(rows >= 1, "unfold: empty input");
  const int left = (kernel - 1) / 2;
  auto src = [rows, left](Eigen::Index t, int j) {
    return std::clamp<Eigen::Index>(t - left + j, 0, rows - 1);
  };
  Matrix<T> v(rows, ch * kernel);
  for (Eigen::Index t = 0; t < rows; ++t)
    for (int j = 0; j < kernel; ++j) v.row(t).segment(j * ch, ch) = x.value().row(src(t, j));
  return Var<T>::make(std::move(v), {x}, [x, kernel, src](Node<T>& n) {
    const Eigen::Index rows_ = x.rows(), ch_ = x.cols();
    Matrix<T> g = Matrix<T>::Zero(rows_, ch_);
    for (Eigen::Index t = 0; t < rows_; ++t)
      for (int j = 0; j < kernel; ++j) g.row(src(t, j)) += n.grad.row(t).segment(j * ch_, ch_);
    detail::push(x.node(), g);
  });
}

/// Per-column normalization over rows: (x - mean) / sqrt(var + eps), with the
/// biased variance. No learned affine.
template <typename T>
Var<T> instance_norm(const Var<T>& x, T eps = T(1e-5)) {
  const Eigen::Index rows = x.rows();
  require(rows >= 2, "instance_norm: need at least 2 frames");
  Eigen::Matrix<T, 1, Eigen::Dynamic> mean = x.value().colwise().mean();
  Matrix<T> centered = x.value().rowwise() - mean;
  Eigen::Matrix<T, 1, Eigen::Dynamic> var = centered.cwiseAbs2().colwise().mean();
  Eigen::Matrix<T, 1, Eigen::Dynamic> inv_std =
      (var.array() + eps).rsqrt().matrix();
  Matrix<T> y = centered.array().rowwise() * inv_std.array();
  return Var<T>::make(y, {x}, [x, y, inv_std](Node<T>& n) {
    const T inv_n = T(1) / static_cast<T>(y.rows());
    Eigen::Matrix<T, 1, Eigen::Dynamic> g_mean = n.grad.colwise().sum() * inv_n;
    Eigen::Matrix<T, 1, Eigen::Dynamic> gy_mean =
        n.grad.cwiseProduct(y).colwise().sum() * inv_n;
    Matrix<T> g = (n.grad.rowwise() - g_mean) - Matrix<T>(y.array().rowwise() * gy_mean.array());
    g = g.array().rowwise() * inv_std.array();
    detail::push(x.node(), g);
  });
}

/// Gradient reversal: identity forward, gradient scaled by -lambda backward.
template <typename T>
Var<T> grad_reverse(const Var<T>& x, T lambda) {
  require(lambda >= T(0), "gradient reversal: lambda must be non-negative");
  return Var<T>::make(x.value(), {x}, [x, lambda](Node<T>& n) {
    detail::push(x.node(), Matrix<T>(n.grad * (-lambda)));
  });
}

/// Row-wise log-softmax.
template <typename T>
Matrix<T> log_softmax_rows(const Matrix<T>& logits) {
  Matrix<T> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const T m = logits.row(r).maxCoeff();
    const T lse = m + std::log((logits.row(r).array() - m).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

/// Mean over rows of the softmax cross-entropy against integer class labels.
template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, std::span<const int> labels) {
  require(static_cast<Eigen::Index>(labels.size()) == logits.rows(),
          "softmax_cross_entropy: one label per row required");
  require(logits.rows() > 0, "softmax_cross_entropy: empty input");
  Matrix<T> lsm = log_softmax_rows(logits.value());
  std::vector<int> lab(labels.begin(), labels.end());
  T loss = 0;
  for (Eigen::Index r = 0; r < lsm.rows(); ++r) {
    require(lab[r] >= 0 && lab[r] < lsm.cols(), "softmax_cross_entropy: label out of range");
    loss -= lsm(r, lab[r]);
  }
  Matrix<T> v(1, 1);
  v(0, 0) = loss / static_cast<T>(lsm.rows());
  return Var<T>::make(std::move(v), {logits}, [logits, lsm, lab](Node<T>& n) {
    Matrix<T> g = lsm.array().exp();
    for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, lab[r]) -= T(1);
    g *= n.grad(0, 0) / static_cast<T>(g.rows());
    detail::push(logits.node(), g);
  });
}

}  // namespace nrvc::ag
