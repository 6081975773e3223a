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

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "nrvc/audio/wav.hpp"

namespace nrvc {

// Analysis front end: 50 ms Hann window, 12.5 ms shift at 16 kHz, 1024-point
// FFT, 256 mel bands over 0-8 kHz, natural-log power with a 1e-10 floor.
inline constexpr int kNumMels = 256;
inline constexpr int kFrameLength = 800;
inline constexpr int kFrameShift = 200;
inline constexpr int kFftSize = 1024;
inline constexpr double kPowerFloor = 1e-10;
inline constexpr double kFrameLengthMs = 50.0;
inline constexpr double kFrameShiftMs = 12.5;

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXcd =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Log-mel spectrogram, one row per frame and one column per mel band.
struct MelSpectrogram {
  RowMatrixXf values;

  Eigen::Index num_frames() const { return values.rows(); }
  Eigen::Index num_mels() const { return values.cols(); }

  void validate() const {
    require(values.cols() == kNumMels, "mel spectrogram must have 256 channels");
    require(values.rows() >= 1, "mel spectrogram must have at least one frame");
    require(values.allFinite(), "mel spectrogram has non-finite entries");
  }
};

/// Number of frames produced for `num_samples` under center padding.
constexpr Eigen::Index num_frames_for(size_t num_samples, int hop = kFrameShift) {
  return 1 + static_cast<Eigen::Index>(num_samples / static_cast<size_t>(hop));
}

/// Index into a signal of length n mirrored about both ends (no edge repeat).
inline long reflect_index(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Short-time Fourier transform with a centered, zero-padded periodic Hann
/// window and reflection padding of n_fft/2 on both sides.
class Stft {
 public:
  Stft(int n_fft = kFftSize, int win_length = kFrameLength, int hop = kFrameShift)
      : n_fft_(n_fft), win_length_(win_length), hop_(hop), window_(n_fft, 0.0) {
    require(n_fft > 0 && hop > 0 && win_length > 0 && win_length <= n_fft,
            "stft: invalid framing");
    const int offset = (n_fft - win_length) / 2;
    for (int i = 0; i < win_length; ++i)
      window_[offset + i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win_length);
  }

  int n_fft() const { return n_fft_; }
  int hop() const { return hop_; }
  int num_bins() const { return n_fft_ / 2 + 1; }
  const std::vector<double>& window() const { return window_; }

  /// Complex spectrum, frames x bins.
  RowMatrixXcd forward(std::span<const double> x) const {
    require(!x.empty(), "stft: empty signal");
    const long n = static_cast<long>(x.size());
    const Eigen::Index frames = num_frames_for(x.size(), hop_);
    const long pad = n_fft_ / 2;
    RowMatrixXcd spec(frames, num_bins());
    std::vector<double> buf(n_fft_);
    std::vector<std::complex<double>> out;
    Eigen::FFT<double> fft;
    for (Eigen::Index t = 0; t < frames; ++t) {
      const long start = t * hop_ - pad;
      for (int i = 0; i < n_fft_; ++i)
        buf[i] = x[static_cast<size_t>(reflect_index(start + i, n))] * window_[i];
      fft.fwd(out, buf);
      for (int k = 0; k < num_bins(); ++k) spec(t, k) = out[k];
    }
    return spec;
  }

  /// Power spectrum |X|^2, frames x bins.
  RowMatrixXd power(std::span<const double> x) const { return forward(x).cwiseAbs2(); }

  /// Weighted overlap-add inverse; removes the center padding and returns
  /// `length` samples.
  std::vector<double> inverse(const RowMatrixXcd& spec, size_t length) const {
    require(spec.cols() == num_bins(), "istft: bin count mismatch");
    const Eigen::Index frames = spec.rows();
    const long pad = n_fft_ / 2;
    const long total = (frames - 1) * hop_ + n_fft_;
    std::vector<double> acc(static_cast<size_t>(total), 0.0);
    std::vector<double> wsum(static_cast<size_t>(total), 0.0);
    std::vector<std::complex<double>> half(n_fft_);
    std::vector<double> frame;
    Eigen::FFT<double> fft;
    for (Eigen::Index t = 0; t < frames; ++t) {
      for (int k = 0; k < num_bins(); ++k) half[k] = spec(t, k);
      for (int k = num_bins(); k < n_fft_; ++k) half[k] = std::conj(half[n_fft_ - k]);
      fft.inv(frame, half);
      const long start = t * hop_;
      for (int i = 0; i < n_fft_; ++i) {
        acc[start + i] += frame[i] * window_[i];
        wsum[start + i] += window_[i] * window_[i];
      }
    }
    std::vector<double> y(length, 0.0);
    for (size_t i = 0; i < length; ++i) {
      const long j = static_cast<long>(i) + pad;
      if (j >= total) break;
      y[i] = wsum[j] > 1e-8 ? acc[j] / wsum[j] : 0.0;
    }
    return y;
  }

 private:
  int n_fft_;
  int win_length_;
  int hop_;
  std::vector<double> window_;
};

inline double hz_to_mel(double hz) {
  // Slaney scale: linear below 1 kHz, logarithmic above.
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return hz < min_log_hz ? hz / f_sp : min_log_mel + std::log(hz / min_log_hz) / logstep;
}

inline double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return mel < min_log_mel ? mel * f_sp : min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

/// Triangular Slaney-normalized filters, n_mels x (n_fft/2 + 1). A filter
/// narrower than two FFT bins is widened to span one bin on either side of
/// its center so that every band receives energy.
inline RowMatrixXd mel_filterbank(int sample_rate = kCanonicalSampleRate, int n_fft = kFftSize,
                                  int n_mels = kNumMels, double fmin = 0.0,
                                  double fmax = -1.0) {
  if (fmax <= 0.0) fmax = sample_rate / 2.0;
  require(fmin >= 0.0 && fmax > fmin, "mel_filterbank: invalid frequency range");
  const int bins = n_fft / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate) / n_fft;
  std::vector<double> edges(n_mels + 2);
  const double mlo = hz_to_mel(fmin), mhi = hz_to_mel(fmax);
  for (int i = 0; i < n_mels + 2; ++i) edges[i] = mel_to_hz(mlo + (mhi - mlo) * i / (n_mels + 1));

  RowMatrixXd fb = RowMatrixXd::Zero(n_mels, bins);
  for (int m = 0; m < n_mels; ++m) {
    const double center = edges[m + 1];
    double lower = edges[m], upper = edges[m + 2];
    if (upper - lower < 2.0 * bin_hz) {
      lower = center - bin_hz;
      upper = center + bin_hz;
    }
    const double norm = 2.0 / (upper - lower);
    for (int k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > lower && f <= center)
        w = (f - lower) / (center - lower);
      else if (f > center && f < upper)
        w = (upper - f) / (upper - center);
      fb(m, k) = norm * w;
    }
  }
  return fb;
}

/// Shared analysis state: STFT and filterbank built once.
class MelAnalyzer {
 public:
  MelAnalyzer() : filters_(mel_filterbank()) {}

  const Stft& stft() const { return stft_; }
  const RowMatrixXd& filters() const { return filters_; }

  /// Mel power (before the log), frames x 256, double precision.
  RowMatrixXd mel_power(const Waveform& w) const {
    check_input(w);
    return stft_.power(w.samples) * filters_.transpose();
  }

  /// Natural-log mel power with the 1e-10 floor, double precision.
  RowMatrixXd log_mel(const Waveform& w) const {
    return mel_power(w).unaryExpr([](double e) { return std::log(std::max(e, kPowerFloor)); });
  }

  MelSpectrogram operator()(const Waveform& w) const {
    MelSpectrogram m;
    m.values = log_mel(w).cast<float>();
    return m;
  }

 private:
  static void check_input(const Waveform& w) {
    require(w.sample_rate == kCanonicalSampleRate,
            "mel_spectrogram: expected 16 kHz input, got " + std::to_string(w.sample_rate));
    require(w.samples.size() >= static_cast<size_t>(kFrameShift),
            "mel_spectrogram: waveform shorter than one hop");
    w.validate();
  }

  Stft stft_;
  RowMatrixXd filters_;
};

inline const MelAnalyzer& default_mel_analyzer() {
  static const MelAnalyzer analyzer;
  return analyzer;
}

/// Log-mel spectrogram of a 16 kHz waveform.
inline MelSpectrogram mel_spectrogram(const Waveform& w) { return default_mel_analyzer()(w); }

}  // namespace nrvc
