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

#include <nlohmann/json.hpp>

#include "nrvc/audio/mel.hpp"
#include "nrvc/common.hpp"

namespace nrvc {

/// Network shapes. Representation sizes default to 128; channel widths are
/// desk-scale defaults.
struct ModelConfig {
  int num_mels = kNumMels;
  int speaker_dim = 128;
  int content_dim = 128;
  /// Gradient reversal scale applied in front of both domain classifiers.
  double grl_lambda = 0.1;

  // Speaker encoder: conv bank (kernels 1..bank_max_kernel, concatenated),
  // residual conv blocks, average pooling, two dense layers.
  int bank_max_kernel = 8;
  int bank_channels = 32;
  int speaker_channels = 128;
  int speaker_res_blocks = 3;
  int speaker_kernel = 3;

  // Content encoder: conv -> instance norm -> ReLU blocks, then 1x1 heads.
  int content_channels = 128;
  int content_blocks = 3;
  int content_kernel = 5;
  double log_variance_min = -7.0;
  double log_variance_max = 7.0;

  // Decoder: AdaIN-conditioned conv blocks plus a single-frame
  // autoregressive path fed through a narrow prenet.
  int decoder_channels = 128;
  int decoder_blocks = 3;
  int decoder_kernel = 5;
  bool autoregressive = true;
  int prenet_dim = 32;
  /// Dropout on the prenet hidden layer during training (inverted scaling,
  /// so inference needs no rescale). Keeps the decoder from leaning on the
  /// teacher frame alone.
  double prenet_dropout = 0.5;

  void validate() const {
    require(num_mels > 0 && speaker_dim > 0 && content_dim > 0, "model: dimensions must be positive");
    require(grl_lambda >= 0.0, "model: grl_lambda must be non-negative");
    require(bank_max_kernel >= 1 && bank_channels > 0 && speaker_channels > 0 &&
                speaker_res_blocks >= 0 && speaker_kernel >= 1,
            "model: invalid speaker encoder shape");
    require(content_channels > 0 && content_blocks >= 1 && content_kernel >= 1,
            "model: invalid content encoder shape");
    require(decoder_channels > 0 && decoder_blocks >= 1 && decoder_kernel >= 1 && prenet_dim > 0,
            "model: invalid decoder shape");
    require(log_variance_min < log_variance_max, "model: invalid log-variance clamp");
    require(prenet_dropout >= 0.0 && prenet_dropout < 1.0, "model: prenet_dropout must lie in [0, 1)");
  }

  bool operator==(const ModelConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"num_mels", c.num_mels},
                     {"speaker_dim", c.speaker_dim},
                     {"content_dim", c.content_dim},
                     {"grl_lambda", c.grl_lambda},
                     {"bank_max_kernel", c.bank_max_kernel},
                     {"bank_channels", c.bank_channels},
                     {"speaker_channels", c.speaker_channels},
                     {"speaker_res_blocks", c.speaker_res_blocks},
                     {"speaker_kernel", c.speaker_kernel},
                     {"content_channels", c.content_channels},
                     {"content_blocks", c.content_blocks},
                     {"content_kernel", c.content_kernel},
                     {"log_variance_min", c.log_variance_min},
                     {"log_variance_max", c.log_variance_max},
                     {"decoder_channels", c.decoder_channels},
                     {"decoder_blocks", c.decoder_blocks},
                     {"decoder_kernel", c.decoder_kernel},
                     {"autoregressive", c.autoregressive},
                     {"prenet_dim", c.prenet_dim},
                     {"prenet_dropout", c.prenet_dropout}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.num_mels = j.value("num_mels", d.num_mels);
  c.speaker_dim = j.value("speaker_dim", d.speaker_dim);
  c.content_dim = j.value("content_dim", d.content_dim);
  c.grl_lambda = j.value("grl_lambda", d.grl_lambda);
  c.bank_max_kernel = j.value("bank_max_kernel", d.bank_max_kernel);
  c.bank_channels = j.value("bank_channels", d.bank_channels);
  c.speaker_channels = j.value("speaker_channels", d.speaker_channels);
  c.speaker_res_blocks = j.value("speaker_res_blocks", d.speaker_res_blocks);
  c.speaker_kernel = j.value("speaker_kernel", d.speaker_kernel);
  c.content_channels = j.value("content_channels", d.content_channels);
  c.content_blocks = j.value("content_blocks", d.content_blocks);
  c.content_kernel = j.value("content_kernel", d.content_kernel);
  c.log_variance_min = j.value("log_variance_min", d.log_variance_min);
  c.log_variance_max = j.value("log_variance_max", d.log_variance_max);
  c.decoder_channels = j.value("decoder_channels", d.decoder_channels);
  c.decoder_blocks = j.value("decoder_blocks", d.decoder_blocks);
  c.decoder_kernel = j.value("decoder_kernel", d.decoder_kernel);
  c.autoregressive = j.value("autoregressive", d.autoregressive);
  c.prenet_dim = j.value("prenet_dim", d.prenet_dim);
  c.prenet_dropout = j.value("prenet_dropout", d.prenet_dropout);
}

}  // namespace nrvc
