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

#pragma once

#include <cmath>
#include <map>
#include <string>

#include "nrvc/autograd.hpp"
#include "nrvc/common.hpp"

namespace nrvc {

using ag::Matrix;
using ag::Var;

/// Named trainable tensors, iterated in lexicographic name order.
template <typename T>
class ParameterSet {
 public:
  Var<T> add(const std::string& name, Matrix<T> init) {
    require(!params_.contains(name), "duplicate parameter " + name);
    auto v = ag::parameter<T>(std::move(init));
    params_.emplace(name, v);
    return v;
  }

  const std::map<std::string, Var<T>>& all() const { return params_; }

  const Var<T>& at(const std::string& name) const {
    auto it = params_.find(name);
    require(it != params_.end(), "unknown parameter " + name);
    return it->second;
  }

  void zero_grad() {
    for (auto& [_, v] : params_) {
      auto copy = v;
      copy.zero_grad();
    }
  }

  size_t num_scalars() const {
    size_t n = 0;
    for (const auto& [_, v] : params_) n += static_cast<size_t>(v.value().size());
    return n;
  }

 private:
  std::map<std::string, Var<T>> params_;
};

/// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
Matrix<T> fan_in_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
  return m;
}

/// y = x W + b, applied to every row of x.
template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(ParameterSet<T>& ps, const std::string& name, int in, int out, Rng& rng)
      : weight_(ps.add(name + ".weight", fan_in_uniform<T>(in, out, in, rng))),
        bias_(ps.add(name + ".bias", Matrix<T>::Zero(1, out))) {}

  Var<T> operator()(const Var<T>& x) const {
    return ag::add_row(ag::matmul(x, weight_), bias_);
  }

  const Var<T>& weight() const { return weight_; }
  const Var<T>& bias() const { return bias_; }

 private:
  Var<T> weight_;
  Var<T> bias_;
};

/// 1-D convolution over time (rows), stride 1, replicate padding, "same"
/// length. Weight layout: (kernel * in) x out, tap-major.
template <typename T>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(ParameterSet<T>& ps, const std::string& name, int in, int out, int kernel, Rng& rng)
      : kernel_(kernel),
        weight_(ps.add(name + ".weight",
                       fan_in_uniform<T>(Eigen::Index(kernel) * in, out,
                                         Eigen::Index(kernel) * in, rng))),
        bias_(ps.add(name + ".bias", Matrix<T>::Zero(1, out))) {}

  Var<T> operator()(const Var<T>& x) const {
    const Var<T> cols = kernel_ == 1 ? x : ag::unfold(x, kernel_);
    return ag::add_row(ag::matmul(cols, weight_), bias_);
  }

  int kernel() const { return kernel_; }

 private:
  int kernel_ = 1;
  Var<T> weight_;
  Var<T> bias_;
};

}  // namespace nrvc
