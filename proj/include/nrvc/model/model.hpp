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
#include <memory>
#include <span>
#include <vector>

#include "nrvc/audio/mel.hpp"
#include "nrvc/model/networks.hpp"

namespace nrvc {

/// Utterance-level speaker code, 1 x speaker_dim.
template <typename T>
struct SpeakerEmbedding {
  Matrix<T> vector;
};

/// Per-frame Gaussian parameters of the content code, frames x content_dim.
template <typename T>
struct ContentPosterior {
  Matrix<T> mean;
  Matrix<T> log_variance;
};

template <typename T>
struct ContentSample {
  Matrix<T> values;
};

/// Two logits per row over (clean, noisy).
template <typename T>
struct DomainLogits {
  Matrix<T> logits;
};

/// Reparameterized draw mean + exp(0.5 * log_variance) * epsilon, on graph
/// values so gradients reach both posterior parameters.
template <typename T>
Var<T> sample_content(const PosteriorVars<T>& p, const Matrix<T>& epsilon) {
  require(epsilon.rows() == p.mean.rows() && epsilon.cols() == p.mean.cols(),
          "sample_content: epsilon shape must match the posterior mean");
  require(p.log_variance.rows() == p.mean.rows() && p.log_variance.cols() == p.mean.cols(),
          "sample_content: mean and log-variance shapes differ");
  const Var<T> stddev = ag::exp(ag::scale(p.log_variance, T(0.5)));
  return ag::add(p.mean, ag::mul(stddev, ag::constant<T>(epsilon)));
}

template <typename T>
ContentSample<T> sample_content(const ContentPosterior<T>& p, const Matrix<T>& epsilon) {
  ag::NoGradGuard guard;
  PosteriorVars<T> v{ag::constant<T>(p.mean), ag::constant<T>(p.log_variance)};
  return {sample_content(v, epsilon).value()};
}

/// Every graph value produced by one training-mode forward pass.
template <typename T>
struct TrainForward {
  Var<T> reconstruction;  // raw log-mel space, frames x num_mels
  Var<T> speaker;         // 1 x speaker_dim
  PosteriorVars<T> posterior;
  Var<T> content;         // sampled, frames x content_dim
  Var<T> speaker_logits;  // 1 x 2, behind gradient reversal
  Var<T> content_logits;  // frames x 2, behind gradient reversal
};

/// Speaker encoder, content encoder, decoder and the two domain heads, plus
/// fixed per-channel feature normalization (mean/std buffers).
template <typename T>
class VoiceConversionModel {
 public:
  explicit VoiceConversionModel(const ModelConfig& cfg = {}, uint64_t seed = 0) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(derive_seed(seed, {0x696e6974ULL}));
    speaker_ = SpeakerEncoder<T>(params_, cfg_, rng);
    content_ = ContentEncoder<T>(params_, cfg_, rng);
    decoder_ = Decoder<T>(params_, cfg_, rng);
    speaker_domain_ = DomainClassifier<T>(params_, "speaker_domain", cfg_.speaker_dim, rng);
    content_domain_ = DomainClassifier<T>(params_, "content_domain", cfg_.content_dim, rng);
    feature_mean_ = Matrix<T>::Zero(1, cfg_.num_mels);
    feature_std_ = Matrix<T>::Ones(1, cfg_.num_mels);
  }

  // Copies would alias parameter storage.
  VoiceConversionModel(const VoiceConversionModel&) = delete;
  VoiceConversionModel& operator=(const VoiceConversionModel&) = delete;
  VoiceConversionModel(VoiceConversionModel&&) = default;
  VoiceConversionModel& operator=(VoiceConversionModel&&) = default;

  const ModelConfig& config() const { return cfg_; }
  ParameterSet<T>& parameters() { return params_; }
  const ParameterSet<T>& parameters() const { return params_; }

  const Matrix<T>& feature_mean() const { return feature_mean_; }
  const Matrix<T>& feature_std() const { return feature_std_; }
  void set_feature_stats(const Matrix<T>& mean, const Matrix<T>& stddev) {
    require(mean.rows() == 1 && mean.cols() == cfg_.num_mels && stddev.rows() == 1 &&
                stddev.cols() == cfg_.num_mels,
            "feature stats must be 1 x num_mels");
    require((stddev.array() > T(0)).all(), "feature std must be positive");
    feature_mean_ = mean;
    feature_std_ = stddev;
  }

  Matrix<T> normalize(const Matrix<T>& raw) const {
    require(raw.cols() == cfg_.num_mels, "input must have num_mels columns");
    require(raw.allFinite(), "input has non-finite entries");
    return (raw.rowwise() - feature_mean_.row(0)).array().rowwise() / feature_std_.row(0).array();
  }

  Var<T> denormalize(const Var<T>& y) const {
    return ag::add_row(ag::mul_row(y, ag::constant<T>(feature_std_)),
                       ag::constant<T>(feature_mean_));
  }

  // Graph-level building blocks. Inputs are normalized features.
  Var<T> speaker_encode(const Var<T>& x) const { return speaker_(x); }
  Var<T> speaker_frame_features(const Var<T>& x) const { return speaker_.frame_features(x); }
  Var<T> speaker_head(const Var<T>& pooled) const { return speaker_.head(pooled); }
  PosteriorVars<T> content_encode(const Var<T>& x, std::vector<Matrix<T>>* normalized = nullptr) const {
    return content_(x, normalized);
  }
  Var<T> classify_speaker_domain(const Var<T>& z_s) const { return speaker_domain_(z_s); }
  Var<T> classify_content_domain(const Var<T>& z_c) const { return content_domain_(z_c); }

  /// Teacher-forced decode; `teacher_raw` is the clean target in raw log-mel
  /// space, shifted by one frame internally. Output is raw log-mel.
  Var<T> decode(const Var<T>& z_s, const Var<T>& z_c, const Matrix<T>* teacher_raw,
                const Matrix<T>* prenet_mask = nullptr) const {
    if (!decoder_.autoregressive()) return denormalize(decoder_.forward(z_s, z_c, nullptr));
    require(teacher_raw != nullptr, "decode: autoregressive training needs a teacher");
    require(teacher_raw->rows() == z_c.rows(),
            "decode: teacher frame count does not match content frames");
    const Matrix<T> norm = normalize(*teacher_raw);
    Matrix<T> prev = Matrix<T>::Zero(norm.rows(), norm.cols());
    if (norm.rows() > 1) prev.bottomRows(norm.rows() - 1) = norm.topRows(norm.rows() - 1);
    const Var<T> prev_var = ag::constant<T>(std::move(prev));
    return denormalize(decoder_.forward(z_s, z_c, &prev_var, prenet_mask));
  }

  /// Autoregressive decode on the model's own outputs. Raw log-mel.
  Matrix<T> generate(const Var<T>& z_s, const Var<T>& z_c) const {
    ag::NoGradGuard guard;
    return denormalize(ag::constant<T>(decoder_.generate(z_s, z_c))).value();
  }

  /// Full training forward pass for one utterance. `input_raw` may be clean
  /// or noisy; `target_raw` is always the clean pair. `epsilon` has the shape
  /// of the content posterior. `dropout_rng`, when given, draws the prenet
  /// dropout mask.
  TrainForward<T> forward_train(const Matrix<T>& input_raw, const Matrix<T>& target_raw,
                                const Matrix<T>& epsilon, T grl_lambda, Rng* dropout_rng = nullptr) const {
    require(input_raw.rows() == target_raw.rows() && input_raw.cols() == target_raw.cols(),
            "forward_train: input and target shapes differ");
    TrainForward<T> f;
    const Var<T> x = ag::constant<T>(normalize(input_raw));
    f.speaker = speaker_(x);
    f.posterior = content_(x);
    f.content = sample_content(f.posterior, epsilon);
    f.speaker_logits = speaker_domain_(ag::grad_reverse(f.speaker, grl_lambda));
    f.content_logits = content_domain_(ag::grad_reverse(f.content, grl_lambda));
    Matrix<T> mask;
    if (dropout_rng && cfg_.autoregressive && cfg_.prenet_dropout > 0.0) {
      const double keep = 1.0 - cfg_.prenet_dropout;
      mask.resize(input_raw.rows(), decoder_.prenet_dim());
      for (Eigen::Index i = 0; i < mask.size(); ++i)
        mask.data()[i] = dropout_rng->uniform() < keep ? static_cast<T>(1.0 / keep) : T(0);
    }
    f.reconstruction = decode(f.speaker, f.content, &target_raw, mask.size() ? &mask : nullptr);
    return f;
  }

  // Value-level API on log-mel spectrograms (raw feature space).

  SpeakerEmbedding<T> speaker_embedding(const MelSpectrogram& mel) const {
    ag::NoGradGuard guard;
    mel.validate();
    return {speaker_(ag::constant<T>(normalize(mel.values.cast<T>()))).value()};
  }

  ContentPosterior<T> content_posterior(const MelSpectrogram& mel) const {
    ag::NoGradGuard guard;
    mel.validate();
    auto p = content_(ag::constant<T>(normalize(mel.values.cast<T>())));
    return {p.mean.value(), p.log_variance.value()};
  }

  DomainLogits<T> speaker_domain_logits(const SpeakerEmbedding<T>& z) const {
    ag::NoGradGuard guard;
    require(z.vector.allFinite(), "speaker embedding has non-finite entries");
    return {speaker_domain_(ag::constant<T>(z.vector)).value()};
  }

  DomainLogits<T> content_domain_logits(const ContentSample<T>& z) const {
    ag::NoGradGuard guard;
    require(z.values.allFinite(), "content sample has non-finite entries");
    return {content_domain_(ag::constant<T>(z.values)).value()};
  }

  /// Inference decode: autoregressive on own output unless `teacher` is given.
  MelSpectrogram decode_mel(const SpeakerEmbedding<T>& z_s, const ContentSample<T>& z_c,
                            const MelSpectrogram* teacher = nullptr) const {
    ag::NoGradGuard guard;
    const Var<T> zs = ag::constant<T>(z_s.vector), zc = ag::constant<T>(z_c.values);
    MelSpectrogram out;
    if (teacher) {
      const Matrix<T> t = teacher->values.cast<T>();
      out.values = decode(zs, zc, &t).value().template cast<float>();
    } else {
      out.values = generate(zs, zc).template cast<float>();
    }
    return out;
  }

 private:
  ModelConfig cfg_;
  ParameterSet<T> params_;
  SpeakerEncoder<T> speaker_;
  ContentEncoder<T> content_;
  Decoder<T> decoder_;
  DomainClassifier<T> speaker_domain_;
  DomainClassifier<T> content_domain_;
  Matrix<T> feature_mean_;
  Matrix<T> feature_std_;
};

}  // namespace nrvc
