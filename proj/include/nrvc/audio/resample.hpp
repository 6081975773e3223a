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

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nrvc/audio/wav.hpp"

namespace nrvc {

struct ResampleOptions {
  /// Zero crossings of the interpolation kernel on each side, at the lower rate.
  int num_zeros = 24;
  /// Fraction of the lower Nyquist frequency kept by the anti-aliasing filter.
  double rolloff = 0.95;
  double kaiser_beta = 8.6;
};

/// Band-limited resampling with a Kaiser-windowed sinc kernel.
/// Output length is round(n * target_rate / sample_rate). Equal rates return
/// the input unchanged.
inline Waveform resample(const Waveform& w, int target_rate,
                         const ResampleOptions& opts = {}) {
  require(target_rate > 0, "resample: target_rate must be positive");
  require(w.sample_rate > 0, "resample: source sample_rate must be positive");
  if (target_rate == w.sample_rate) return w;

  const double ratio = static_cast<double>(target_rate) / w.sample_rate;
  const double cutoff = std::min(1.0, ratio) * opts.rolloff;
  const double half_width = opts.num_zeros / cutoff;  // in input samples
  const double i0_beta = std::cyl_bessel_i(0.0, opts.kaiser_beta);
  const auto n_in = static_cast<long>(w.samples.size());
  const auto n_out = static_cast<long>(std::llround(n_in * ratio));

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.assign(static_cast<size_t>(std::max<long>(n_out, 0)), 0.0);
  for (long n = 0; n < n_out; ++n) {
    const double t = n / ratio;
    const long lo = std::max<long>(0, static_cast<long>(std::ceil(t - half_width)));
    const long hi = std::min<long>(n_in - 1, static_cast<long>(std::floor(t + half_width)));
    double acc = 0.0;
    for (long k = lo; k <= hi; ++k) {
      const double d = t - k;
      const double x = cutoff * d;
      const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double r = d / half_width;
      const double win = std::cyl_bessel_i(0.0, opts.kaiser_beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
      acc += w.samples[static_cast<size_t>(k)] * cutoff * sinc * win;
    }
    out.samples[static_cast<size_t>(n)] = acc;
  }
  return out;
}

}  // namespace nrvc
