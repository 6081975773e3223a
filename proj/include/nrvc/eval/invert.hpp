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
#include <complex>
#include <numbers>

#include <Eigen/QR>

#include "nrvc/audio/mel.hpp"

namespace nrvc {

struct GriffinLimOptions {
  int iterations = 32;
  double momentum = 0.99;
  uint64_t seed = 0;
};

/// Linear magnitude estimate from log-mel: pseudo-inverse of the filterbank
/// applied to mel power, clamped at zero, square-rooted.
inline RowMatrixXd mel_to_magnitude(const MelSpectrogram& mel) {
  mel.validate();
  static const RowMatrixXd pinv = [] {
    const RowMatrixXd& fb = default_mel_analyzer().filters();
    return RowMatrixXd(fb.completeOrthogonalDecomposition().pseudoInverse());
  }();
  const RowMatrixXd power = mel.values.cast<double>().array().exp().matrix();
  return (power * pinv.transpose()).cwiseMax(0.0).cwiseSqrt();
}

/// Fast Griffin-Lim phase reconstruction. Output has (frames - 1) * hop
/// samples at 16 kHz.
inline Waveform invert_to_waveform(const MelSpectrogram& mel, const GriffinLimOptions& opt = {}) {
  require(opt.iterations >= 0 && opt.momentum >= 0.0, "invalid Griffin-Lim options");
  const Stft& stft = default_mel_analyzer().stft();
  const RowMatrixXd mag = mel_to_magnitude(mel);
  const size_t length = static_cast<size_t>(std::max<Eigen::Index>(mel.num_frames() - 1, 1)) * kFrameShift;

  Rng rng(derive_seed(opt.seed, {0x676cULL}));
  RowMatrixXcd angles(mag.rows(), mag.cols());
  for (Eigen::Index i = 0; i < angles.size(); ++i)
    angles.data()[i] = std::polar(1.0, 2.0 * std::numbers::pi * rng.uniform());

  RowMatrixXcd prev = RowMatrixXcd::Zero(mag.rows(), mag.cols());
  const double m = opt.momentum / (1.0 + opt.momentum);
  for (int it = 0; it < opt.iterations; ++it) {
    const auto y = stft.inverse(mag.cast<std::complex<double>>().cwiseProduct(angles), length);
    RowMatrixXcd rebuilt = stft.forward(y);
    // Frame count of the resynthesis can differ by one; compare on the overlap.
    RowMatrixXcd next = RowMatrixXcd::Zero(mag.rows(), mag.cols());
    const Eigen::Index f = std::min(rebuilt.rows(), mag.rows());
    next.topRows(f) = rebuilt.topRows(f) - m * prev.topRows(f);
    for (Eigen::Index i = 0; i < next.size(); ++i) {
      const double a = std::abs(next.data()[i]);
      angles.data()[i] = a > 1e-16 ? next.data()[i] / a : std::complex<double>(1.0, 0.0);
    }
    prev.setZero();
    prev.topRows(f) = rebuilt.topRows(f);
  }
  Waveform w{stft.inverse(mag.cast<std::complex<double>>().cwiseProduct(angles), length),
             kCanonicalSampleRate};
  for (double& s : w.samples) s = std::clamp(s, -1.0, 1.0);
  return w;
}

}  // namespace nrvc
