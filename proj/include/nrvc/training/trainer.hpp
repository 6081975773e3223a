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

#include "nrvc/model/checkpoint.hpp"
#include "nrvc/model/model.hpp"
#include "nrvc/objectives.hpp"
#include "nrvc/training/config.hpp"
#include "nrvc/training/dataset.hpp"

namespace nrvc {

// Stream tags for derive_seed().
inline constexpr uint64_t kSeedModelInit = 1;
inline constexpr uint64_t kSeedBatch = 2;
inline constexpr uint64_t kSeedEpsilon = 3;
inline constexpr uint64_t kSeedDropout = 4;

/// Adam with bias correction. Moments are keyed by parameter name.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  int64_t steps() const { return t_; }

  void step(ParameterSet<T>& params) {
    ++t_;
    const T lr = static_cast<T>(cfg_.learning_rate);
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T eps = static_cast<T>(cfg_.epsilon);
    const T c1 = T(1) - static_cast<T>(std::pow(cfg_.beta1, static_cast<double>(t_)));
    const T c2 = T(1) - static_cast<T>(std::pow(cfg_.beta2, static_cast<double>(t_)));
    for (const auto& [name, p] : params.all()) {
      auto [it_m, fresh] = m_.try_emplace(name, Matrix<T>::Zero(p.rows(), p.cols()));
      auto [it_v, _] = v_.try_emplace(name, Matrix<T>::Zero(p.rows(), p.cols()));
      const Matrix<T> g = p.grad();
      Matrix<T>& m = it_m->second;
      Matrix<T>& v = it_v->second;
      m = b1 * m + (T(1) - b1) * g;
      v = b2 * v + (T(1) - b2) * g.cwiseAbs2();
      auto param = p;
      param.mutable_value().array() -=
          lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
  }

  void store(Checkpoint& c) const {
    for (const auto& [name, m] : m_) c.tensors["adam_m/" + name] = m.template cast<float>();
    for (const auto& [name, v] : v_) c.tensors["adam_v/" + name] = v.template cast<float>();
    c.metadata["optimizer_steps"] = t_;
  }

  void restore(const Checkpoint& c, const ParameterSet<T>& params) {
    m_.clear();
    v_.clear();
    t_ = c.metadata.value("optimizer_steps", int64_t{0});
    if (t_ == 0) return;
    for (const auto& [name, p] : params.all()) {
      auto im = c.tensors.find("adam_m/" + name);
      auto iv = c.tensors.find("adam_v/" + name);
      if (im == c.tensors.end() || iv == c.tensors.end())
        throw InvalidArgument("checkpoint lacks optimizer state for " + name);
      require(im->second.rows() == p.rows() && im->second.cols() == p.cols() &&
                  iv->second.rows() == p.rows() && iv->second.cols() == p.cols(),
              "optimizer state shape mismatch for " + name);
      m_[name] = im->second.template cast<T>();
      v_[name] = iv->second.template cast<T>();
    }
  }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::map<std::string, Matrix<T>> m_, v_;
};

/// Loss values of one step plus domain-classifier accuracies.
struct StepReport {
  int64_t step = 0;
  LossBreakdown losses;
  double content_domain_accuracy = 0.0;
  double speaker_domain_accuracy = 0.0;
};

inline nlohmann::json to_json_line(const StepReport& r) {
  return nlohmann::json{{"step", r.step},
                        {"recon", r.losses.recon},
                        {"kl", r.losses.kl},
                        {"dat_zc", r.losses.dat_zc},
                        {"dat_zs", r.losses.dat_zs},
                        {"total", r.losses.total},
                        {"acc_content_domain", r.content_domain_accuracy},
                        {"acc_speaker_domain", r.speaker_domain_accuracy}};
}

/// Joint optimization of all five networks with one optimizer. One step:
/// forward every batch element, sum the weighted loss, one backward pass
/// (encoders receive reversed domain gradients through the GRLs), one update.
template <typename T>
class Trainer {
 public:
  Trainer(VoiceConversionModel<T>& model, TrainConfig cfg)
      : model_(model), cfg_(std::move(cfg)), adam_(cfg_.optimizer) {
    cfg_.validate();
  }

  const TrainConfig& config() const { return cfg_; }
  int64_t step_count() const { return step_; }
  void set_step_count(int64_t s) { step_ = s; }
  Adam<T>& optimizer() { return adam_; }
  const Adam<T>& optimizer() const { return adam_; }

  /// Loss weights in effect at `step` (beta ramps up when KL annealing is on).
  LossWeights weights_at(int64_t step) const {
    LossWeights w = cfg_.loss_weights;
    if (cfg_.kl_anneal_steps > 0)
      w.beta *= std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(cfg_.kl_anneal_steps));
    return w;
  }

  /// Forward + backward without updating; gradients are left on the
  /// parameters. Throws NonFiniteLoss naming the first bad term.
  StepReport compute_gradients(const TrainBatch& batch, const LossWeights& w) {
    require(batch.size() > 0, "empty batch");
    auto& params = model_.parameters();
    params.zero_grad();
    Rng eps_rng(derive_seed(cfg_.seed, {kSeedEpsilon, static_cast<uint64_t>(step_)}));
    Rng dropout_rng(derive_seed(cfg_.seed, {kSeedDropout, static_cast<uint64_t>(step_)}));
    const T lambda = static_cast<T>(cfg_.grl_lambda);
    const T inv_b = T(1) / static_cast<T>(batch.size());

    Var<T> recon, kl, dat_zc, dat_zs;
    double acc_c = 0.0, acc_s = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
      const Matrix<T> input = batch.input_mel[i].template cast<T>();
      const Matrix<T> target = batch.target_mel[i].template cast<T>();
      Matrix<T> eps(input.rows(), model_.config().content_dim);
      for (Eigen::Index k = 0; k < eps.size(); ++k) eps.data()[k] = static_cast<T>(eps_rng.normal());
      const TrainForward<T> f = model_.forward_train(input, target, eps, lambda, &dropout_rng);
      const Var<T> r = recon_loss(f.reconstruction, ag::constant<T>(target));
      const Var<T> k = kl_loss(f.posterior.mean, f.posterior.log_variance);
      const Var<T> dc = domain_loss(f.content_logits, batch.domain[i]);
      const Var<T> ds = domain_loss(f.speaker_logits, batch.domain[i]);
      recon = recon.defined() ? ag::add(recon, r) : r;
      kl = kl.defined() ? ag::add(kl, k) : k;
      dat_zc = dat_zc.defined() ? ag::add(dat_zc, dc) : dc;
      dat_zs = dat_zs.defined() ? ag::add(dat_zs, ds) : ds;
      acc_c += domain_accuracy(f.content_logits.value(), batch.domain[i]);
      acc_s += domain_accuracy(f.speaker_logits.value(), batch.domain[i]);
    }
    recon = ag::scale(recon, inv_b);
    kl = ag::scale(kl, inv_b);
    dat_zc = ag::scale(dat_zc, inv_b);
    dat_zs = ag::scale(dat_zs, inv_b);

    const std::pair<const char*, const Var<T>*> terms[] = {
        {"recon", &recon}, {"kl", &kl}, {"dat_zc", &dat_zc}, {"dat_zs", &dat_zs}};
    for (const auto& [name, v] : terms)
      if (!std::isfinite(static_cast<double>(v->scalar()))) throw NonFiniteLoss(name);

    const Var<T> total = weighted_total(recon, kl, dat_zc, dat_zs, w);
    ag::backward(total);
    for (const auto& [name, p] : params.all())
      if (!p.grad().allFinite()) throw NonFiniteLoss("gradient of " + name);

    StepReport rep;
    rep.step = step_;
    rep.losses = total_loss(recon.scalar(), kl.scalar(), dat_zc.scalar(), dat_zs.scalar(), w);
    rep.content_domain_accuracy = acc_c / static_cast<double>(batch.size());
    rep.speaker_domain_accuracy = acc_s / static_cast<double>(batch.size());
    return rep;
  }

  /// One optimization step; the report holds the pre-update losses.
  StepReport step(const TrainBatch& batch) {
    StepReport rep = compute_gradients(batch, weights_at(step_));
    adam_.step(model_.parameters());
    ++step_;
    return rep;
  }

  /// Batch for the current step, drawn from a stream keyed by (seed, step) so
  /// resumed runs see the same data as uninterrupted ones.
  TrainBatch next_batch(const FeatureDataset& data) const {
    Rng rng(derive_seed(cfg_.seed, {kSeedBatch, static_cast<uint64_t>(step_)}));
    return make_batch(data, cfg_, rng);
  }

  Checkpoint checkpoint() const {
    Checkpoint c;
    store_model(model_, c);
    adam_.store(c);
    c.metadata["format"] = "nrvc-checkpoint";
    c.metadata["step"] = step_;
    c.metadata["seed"] = cfg_.seed;
    c.metadata["config"] = cfg_;
    return c;
  }

  /// Restores model, optimizer and step counter. The checkpoint's model
  /// config must equal this trainer's.
  void restore(const Checkpoint& c) {
    const ModelConfig saved = c.metadata.at("config").at("model").get<ModelConfig>();
    ModelConfig mine = model_.config();
    ModelConfig theirs = saved;
    mine.grl_lambda = theirs.grl_lambda = 0.0;
    if (!(mine == theirs)) throw InvalidArgument("checkpoint model config does not match run config");
    restore_model(c, model_);
    adam_.restore(c, model_.parameters());
    step_ = c.metadata.value("step", int64_t{0});
  }

 private:
  VoiceConversionModel<T>& model_;
  TrainConfig cfg_;
  Adam<T> adam_;
  int64_t step_ = 0;
};

/// Rebuilds a model from a checkpoint written by a Trainer.
template <typename T = float>
VoiceConversionModel<T> model_from_checkpoint(const Checkpoint& c) {
  if (!c.metadata.contains("config") || !c.metadata["config"].contains("model"))
    throw InvalidArgument("checkpoint metadata has no model config");
  const TrainConfig cfg = c.metadata.at("config").get<TrainConfig>();
  VoiceConversionModel<T> m(cfg.effective_model(), 0);
  restore_model(c, m);
  return m;
}

}  // namespace nrvc
