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

// The five networks: speaker encoder, content encoder, decoder and two
// binary domain classifiers. All of them take and return time-major
// matrices (frames x channels).

#pragma once

#include <string>
#include <vector>

#include "nrvc/model/config.hpp"
#include "nrvc/model/layers.hpp"

namespace nrvc {

/// Gaussian posterior over per-frame content codes, as graph values.
template <typename T>
struct PosteriorVars {
  Var<T> mean;
  Var<T> log_variance;
};

/// Conv bank -> 1x1 projection -> residual conv blocks -> average pooling
/// over time -> two dense layers. Output is 1 x speaker_dim for any length.
template <typename T>
class SpeakerEncoder {
 public:
  SpeakerEncoder() = default;
  SpeakerEncoder(ParameterSet<T>& ps, const ModelConfig& cfg, Rng& rng) {
    const std::string p = "speaker_encoder.";
    for (int k = 1; k <= cfg.bank_max_kernel; ++k)
      bank_.emplace_back(ps, p + "bank.k" + std::to_string(k), cfg.num_mels, cfg.bank_channels, k, rng);
    project_ = Conv1d<T>(ps, p + "project", cfg.bank_max_kernel * cfg.bank_channels,
                         cfg.speaker_channels, 1, rng);
    for (int b = 0; b < cfg.speaker_res_blocks; ++b)
      res_.emplace_back(ps, p + "res" + std::to_string(b), cfg.speaker_channels,
                        cfg.speaker_channels, cfg.speaker_kernel, rng);
    dense1_ = Dense<T>(ps, p + "dense1", cfg.speaker_channels, cfg.speaker_channels, rng);
    dense2_ = Dense<T>(ps, p + "dense2", cfg.speaker_channels, cfg.speaker_dim, rng);
  }

  /// Frame-level features before pooling, frames x speaker_channels.
  Var<T> frame_features(const Var<T>& x) const {
    std::vector<Var<T>> outs;
    outs.reserve(bank_.size());
    for (const auto& conv : bank_) outs.push_back(ag::relu(conv(x)));
    Var<T> h = ag::relu(project_(ag::concat_cols(outs)));
    for (const auto& conv : res_) h = ag::add(h, ag::relu(conv(h)));
    return h;
  }

  /// Dense head applied to pooled features (1 x speaker_channels).
  Var<T> head(const Var<T>& pooled) const { return dense2_(ag::relu(dense1_(pooled))); }

  Var<T> operator()(const Var<T>& x) const { return head(ag::mean_rows(frame_features(x))); }

 private:
  std::vector<Conv1d<T>> bank_;
  Conv1d<T> project_;
  std::vector<Conv1d<T>> res_;
  Dense<T> dense1_, dense2_;
};

/// Stride-1 conv blocks, each conv -> instance norm (no affine) -> ReLU,
/// followed by parallel 1x1 heads for mean and clamped log-variance.
template <typename T>
class ContentEncoder {
 public:
  ContentEncoder() = default;
  ContentEncoder(ParameterSet<T>& ps, const ModelConfig& cfg, Rng& rng)
      : lv_min_(static_cast<T>(cfg.log_variance_min)),
        lv_max_(static_cast<T>(cfg.log_variance_max)) {
    const std::string p = "content_encoder.";
    int in = cfg.num_mels;
    for (int b = 0; b < cfg.content_blocks; ++b) {
      blocks_.emplace_back(ps, p + "conv" + std::to_string(b), in, cfg.content_channels,
                           cfg.content_kernel, rng);
      in = cfg.content_channels;
    }
    mean_head_ = Conv1d<T>(ps, p + "mean", in, cfg.content_dim, 1, rng);
    logvar_head_ = Conv1d<T>(ps, p + "log_variance", in, cfg.content_dim, 1, rng);
  }

  /// `normalized`, when given, receives the output of every instance-norm
  /// sublayer.
  PosteriorVars<T> operator()(const Var<T>& x, std::vector<Matrix<T>>* normalized = nullptr) const {
    require(x.rows() >= 2, "content encoder: need at least 2 frames");
    Var<T> h = x;
    for (const auto& conv : blocks_) {
      Var<T> n = ag::instance_norm(conv(h));
      if (normalized) normalized->push_back(n.value());
      h = ag::relu(n);
    }
    return {mean_head_(h), ag::clamp(logvar_head_(h), lv_min_, lv_max_)};
  }

 private:
  T lv_min_ = T(-7), lv_max_ = T(7);
  std::vector<Conv1d<T>> blocks_;
  Conv1d<T> mean_head_, logvar_head_;
};

/// Speaker-conditioned decoder. z_s is mapped to per-block AdaIN scale and
/// shift; z_c goes through conv -> instance norm -> AdaIN -> ReLU residual
/// blocks and a dense output layer. With `autoregressive`, the previous
/// output frame enters through a prenet and is added to every frame.
template <typename T>
class Decoder {
 public:
  Decoder() = default;
  Decoder(ParameterSet<T>& ps, const ModelConfig& cfg, Rng& rng)
      : channels_(cfg.decoder_channels), prenet_dim_(cfg.prenet_dim), autoregressive_(cfg.autoregressive) {
    const std::string p = "decoder.";
    const int blocks = cfg.decoder_blocks;
    condition_ = Dense<T>(ps, p + "condition", cfg.speaker_dim, 2 * channels_ * blocks, rng);
    // Scale halves start at 1 so AdaIN begins as plain instance norm.
    auto bias = condition_.bias();
    for (int b = 0; b < blocks; ++b)
      bias.mutable_value().middleCols(2 * channels_ * b, channels_).setOnes();
    input_ = Conv1d<T>(ps, p + "input", cfg.content_dim, channels_, 1, rng);
    for (int b = 0; b < blocks; ++b)
      blocks_.emplace_back(ps, p + "conv" + std::to_string(b), channels_, channels_,
                           cfg.decoder_kernel, rng);
    output_ = Dense<T>(ps, p + "output", channels_, cfg.num_mels, rng);
    if (autoregressive_) {
      prenet1_ = Dense<T>(ps, p + "prenet1", cfg.num_mels, cfg.prenet_dim, rng);
      prenet2_ = Dense<T>(ps, p + "prenet2", cfg.prenet_dim, cfg.num_mels, rng);
    }
  }

  bool autoregressive() const { return autoregressive_; }

  /// Non-recurrent part: frames x num_mels, in normalized feature space.
  Var<T> body(const Var<T>& z_s, const Var<T>& z_c) const {
    require(z_s.rows() == 1, "decoder: speaker embedding must be a single row");
    require(z_c.rows() >= 2, "decoder: need at least 2 content frames");
    const Var<T> cond = condition_(z_s);
    Var<T> h = input_(z_c);
    for (size_t b = 0; b < blocks_.size(); ++b) {
      const auto off = static_cast<Eigen::Index>(2 * channels_ * b);
      const Var<T> gamma = ag::slice_cols(cond, off, channels_);
      const Var<T> beta = ag::slice_cols(cond, off + channels_, channels_);
      Var<T> n = ag::instance_norm(blocks_[b](h));
      h = ag::add(h, ag::relu(ag::add_row(ag::mul_row(n, gamma), beta)));
    }
    return output_(h);
  }

  int prenet_dim() const { return prenet_dim_; }

  /// Contribution of the previous frames (rows of `prev`). `mask`, when
  /// given, multiplies the prenet hidden layer (frames x prenet_dim).
  Var<T> recurrent(const Var<T>& prev, const Matrix<T>* mask = nullptr) const {
    Var<T> h = ag::relu(prenet1_(prev));
    if (mask) h = ag::mul(h, ag::constant<T>(*mask));
    return prenet2_(h);
  }

  /// Training path: previous frames are given (teacher forcing), so all
  /// frames are computed in parallel. `prev` is frames x num_mels.
  Var<T> forward(const Var<T>& z_s, const Var<T>& z_c, const Var<T>* prev,
                 const Matrix<T>* mask = nullptr) const {
    Var<T> base = body(z_s, z_c);
    if (!autoregressive_) return base;
    require(prev != nullptr, "decoder: autoregressive mode needs previous frames");
    require(prev->rows() == base.rows() && prev->cols() == base.cols(),
            "decoder: teacher shape does not match content frames");
    return ag::add(base, recurrent(*prev, mask));
  }

  /// Inference path: frame-by-frame recurrence on the decoder's own output,
  /// starting from a zero frame. Returns normalized features.
  Matrix<T> generate(const Var<T>& z_s, const Var<T>& z_c) const {
    ag::NoGradGuard guard;
    const Matrix<T> base = body(z_s, z_c).value();
    if (!autoregressive_) return base;
    Matrix<T> out(base.rows(), base.cols());
    Var<T> prev = ag::constant<T>(Matrix<T>::Zero(1, base.cols()));
    for (Eigen::Index t = 0; t < base.rows(); ++t) {
      out.row(t) = base.row(t) + recurrent(prev).value();
      prev = ag::constant<T>(Matrix<T>(out.row(t)));
    }
    return out;
  }

 private:
  int channels_ = 0;
  int prenet_dim_ = 0;
  bool autoregressive_ = true;
  Dense<T> condition_;
  Conv1d<T> input_;
  std::vector<Conv1d<T>> blocks_;
  Dense<T> output_;
  Dense<T> prenet1_, prenet2_;
};

/// Dense layer to 2 logits (clean, noisy); softmax lives in the loss. Rows
/// are classified independently with shared weights.
template <typename T>
class DomainClassifier {
 public:
  DomainClassifier() = default;
  DomainClassifier(ParameterSet<T>& ps, const std::string& name, int in, Rng& rng)
      : dense_(ps, name, in, 2, rng) {}

  Var<T> operator()(const Var<T>& z) const { return dense_(z); }

 private:
  Dense<T> dense_;
};

}  // namespace nrvc
