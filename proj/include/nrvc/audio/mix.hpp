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
#include <span>
#include <vector>

#include "nrvc/audio/wav.hpp"

namespace nrvc {

/// Result of corrupting a clean waveform with scaled noise.
struct MixResult {
  Waveform mixture;
  /// Gain applied to the noise segment.
  double gain = 0.0;
  /// The aligned (unscaled) noise segment, same length as the clean signal.
  std::vector<double> noise_segment;
  /// Number of mixture samples clipped to [-1, 1].
  size_t clipped = 0;
};

/// Extracts `length` noise samples starting at `offset`, wrapping around the
/// end of the clip when it is shorter than the requested length.
inline std::vector<double> align_noise(std::span<const double> noise, size_t length,
                                       size_t offset) {
  require(!noise.empty(), "align_noise: empty noise");
  std::vector<double> seg(length);
  for (size_t i = 0; i < length; ++i) seg[i] = noise[(offset + i) % noise.size()];
  return seg;
}

/// Random crop offset for a noise clip of `noise_len` samples against an
/// utterance of `length`; 0 when the clip has to be tiled.
inline size_t random_noise_offset(size_t noise_len, size_t length, Rng& rng) {
  if (noise_len <= length) return 0;
  return static_cast<size_t>(rng.uniform_int(noise_len - length + 1));
}

/// Noise gain that places `noise` at `snr_db` below `clean`, with power
/// measured as the mean square over the full segments.
inline double snr_gain(double clean_power, double noise_power, double snr_db) {
  require(clean_power > 0.0, "mix_at_snr: clean signal has zero power");
  require(noise_power > 0.0, "mix_at_snr: noise has zero power");
  return std::sqrt(clean_power / (noise_power * std::pow(10.0, snr_db / 10.0)));
}

/// 10*log10(P_signal / P_noise).
inline double measured_snr_db(std::span<const double> signal, std::span<const double> noise) {
  return 10.0 * std::log10(signal_power(signal) / signal_power(noise));
}

/// Adds `noise_segment` (already aligned, same length as `clean`) at `snr_db`.
inline MixResult mix_at_snr(const Waveform& clean, std::span<const double> noise_segment,
                            double snr_db) {
  require(noise_segment.size() == clean.samples.size(),
          "mix_at_snr: noise segment length must match clean length");
  const double g = snr_gain(signal_power(clean.samples), signal_power(noise_segment), snr_db);
  MixResult r;
  r.gain = g;
  r.noise_segment.assign(noise_segment.begin(), noise_segment.end());
  r.mixture.sample_rate = clean.sample_rate;
  r.mixture.samples.resize(clean.samples.size());
  for (size_t i = 0; i < clean.samples.size(); ++i) {
    const double v = clean.samples[i] + g * noise_segment[i];
    if (v > 1.0 || v < -1.0) ++r.clipped;
    r.mixture.samples[i] = std::clamp(v, -1.0, 1.0);
  }
  return r;
}

/// Aligns `noise` to `clean` (random crop or wraparound tiling) and mixes.
inline MixResult mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db,
                            size_t offset) {
  require(clean.sample_rate == noise.sample_rate, "mix_at_snr: sample rates differ");
  require(!noise.samples.empty(), "mix_at_snr: empty noise");
  const auto seg = align_noise(noise.samples, clean.samples.size(), offset);
  return mix_at_snr(clean, seg, snr_db);
}

inline MixResult mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db,
                            Rng& rng) {
  return mix_at_snr(clean, noise, snr_db,
                    random_noise_offset(noise.samples.size(), clean.samples.size(), rng));
}

}  // namespace nrvc
