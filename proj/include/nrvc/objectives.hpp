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

// Loss terms and their weighted sum.
//
// The domain terms are ordinary cross-entropies minimized by the classifiers.
// The encoders see them only through gradient reversal, which is what turns
// the minimization into maximization for the encoder parameters; nothing in
// this file flips a sign.

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "nrvc/audio/manifest.hpp"
#include "nrvc/audio/mel.hpp"
#include "nrvc/autograd.hpp"

namespace nrvc {

struct LossWeights {
  double alpha = 10.0;  // reconstruction
  double beta = 0.5;    // KL
  double gamma = 0.1;   // speaker-domain
  double tau = 0.1;     // content-domain

  void validate() const {
    require(alpha >= 0 && beta >= 0 && gamma >= 0 && tau >= 0,
            "loss weights must be non-negative");
  }
  bool operator==(const LossWeights&) const = default;
};

inline void to_json(nlohmann::json& j, const LossWeights& w) {
  j = nlohmann::json{{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}, {"tau", w.tau}};
}
inline void from_json(const nlohmann::json& j, LossWeights& w) {
  LossWeights d;
  w.alpha = j.value("alpha", d.alpha);
  w.beta = j.value("beta", d.beta);
  w.gamma = j.value("gamma", d.gamma);
  w.tau = j.value("tau", d.tau);
}

struct LossBreakdown {
  double recon = 0.0;
  double kl = 0.0;
  double dat_zc = 0.0;
  double dat_zs = 0.0;
  double total = 0.0;
};

/// total = alpha*recon + beta*kl + tau*dat_zc + gamma*dat_zs.
inline LossBreakdown total_loss(double recon, double kl, double dat_zc, double dat_zs,
                                const LossWeights& w) {
  LossBreakdown b{recon, kl, dat_zc, dat_zs, 0.0};
  b.total = w.alpha * recon + w.beta * kl + w.tau * dat_zc + w.gamma * dat_zs;
  return b;
}

// ---- graph-level losses -------------------------------------------------------

/// Mean absolute error over all entries.
template <typename T>
ag::Var<T> recon_loss(const ag::Var<T>& x_hat, const ag::Var<T>& x_clean) {
  return ag::mean_abs_diff(x_hat, x_clean);
}

/// KL(N(mu, diag(exp(lv))) || N(0, I)), summed over dimensions and averaged
/// over frames.
template <typename T>
ag::Var<T> kl_loss(const ag::Var<T>& mean, const ag::Var<T>& log_variance) {
  require(mean.rows() == log_variance.rows() && mean.cols() == log_variance.cols(),
          "kl_loss: mean and log-variance shapes differ");
  require(mean.rows() > 0, "kl_loss: empty posterior");
  require(mean.value().allFinite() && log_variance.value().allFinite(),
          "kl_loss: non-finite posterior");
  const auto& mu = mean.value();
  const auto& lv = log_variance.value();
  const T inv_frames = T(1) / static_cast<T>(mu.rows());
  ag::Matrix<T> v(1, 1);
  v(0, 0) = T(0.5) * (mu.array().square() + lv.array().exp() - T(1) - lv.array()).sum() * inv_frames;
  return ag::Var<T>::make(std::move(v), {mean, log_variance},
                          [mean, log_variance, inv_frames](ag::Node<T>& n) {
                            const T g = n.grad(0, 0) * inv_frames;
                            if (mean.requires_grad())
                              ag::detail::push(mean.node(), ag::Matrix<T>(mean.value() * g));
                            if (log_variance.requires_grad())
                              ag::detail::push(
                                  log_variance.node(),
                                  ag::Matrix<T>((log_variance.value().array().exp() - T(1)) *
                                                (T(0.5) * g)));
                          });
}

/// Softmax cross-entropy of 2-class logits against one domain label, averaged
/// over rows (frames for the content head, a single row for the speaker head).
template <typename T>
ag::Var<T> domain_loss(const ag::Var<T>& logits, Domain label) {
  require(logits.cols() == 2, "domain_loss: logits must have 2 columns");
  require(logits.value().allFinite(), "domain_loss: non-finite logits");
  const std::vector<int> labels(static_cast<size_t>(logits.rows()), domain_index(label));
  return ag::softmax_cross_entropy(logits, std::span<const int>(labels));
}

/// Weighted sum on the graph, in the same term order as total_loss().
template <typename T>
ag::Var<T> weighted_total(const ag::Var<T>& recon, const ag::Var<T>& kl, const ag::Var<T>& dat_zc,
                          const ag::Var<T>& dat_zs, const LossWeights& w) {
  auto t = ag::add(ag::scale(recon, static_cast<T>(w.alpha)), ag::scale(kl, static_cast<T>(w.beta)));
  t = ag::add(t, ag::scale(dat_zc, static_cast<T>(w.tau)));
  return ag::add(t, ag::scale(dat_zs, static_cast<T>(w.gamma)));
}

// ---- value-level convenience ------------------------------------------------------

inline double recon_loss(const MelSpectrogram& x_hat, const MelSpectrogram& x_clean) {
  require(x_hat.values.rows() == x_clean.values.rows() && x_hat.values.cols() == x_clean.values.cols(),
          "recon_loss: shape mismatch");
  require(x_hat.values.size() > 0, "recon_loss: empty input");
  return (x_hat.values.cast<double>() - x_clean.values.cast<double>()).cwiseAbs().mean();
}

template <typename T>
double kl_loss(const ag::Matrix<T>& mean, const ag::Matrix<T>& log_variance) {
  ag::NoGradGuard guard;
  return static_cast<double>(
      kl_loss(ag::constant<T>(mean), ag::constant<T>(log_variance)).scalar());
}

template <typename T>
double domain_loss(const ag::Matrix<T>& logits, Domain label) {
  ag::NoGradGuard guard;
  return static_cast<double>(domain_loss(ag::constant<T>(logits), label).scalar());
}

/// Fraction of rows whose argmax equals `label`.
template <typename T>
double domain_accuracy(const ag::Matrix<T>& logits, Domain label) {
  if (logits.rows() == 0) return 0.0;
  const int want = domain_index(label);
  Eigen::Index hits = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int pred = logits(r, 1) > logits(r, 0) ? 1 : 0;
    hits += pred == want;
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

}  // namespace nrvc
