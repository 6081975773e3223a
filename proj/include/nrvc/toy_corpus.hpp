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

// Synthetic speech-like corpus for smoke runs and behavioral tests.
//
// Speakers differ in pitch and vocal-tract length (formants scaled together).
// Utterances are short sequences of vowel and fricative segments rendered by
// a source-filter model: pulse-train or noise excitation through a cascade of
// time-varying two-pole resonators.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "nrvc/audio/wav.hpp"
#include "nrvc/common.hpp"

namespace nrvc::toy {

struct SpeakerVoice {
  std::string name;
  double f0_hz;
  double formant_scale;
};

struct CorpusOptions {
  std::vector<SpeakerVoice> speakers{{"spk_low", 120.0, 1.0}, {"spk_high", 220.0, 1.18}};
  int utterances_per_speaker = 20;
  double min_seconds = 0.8;
  double max_seconds = 1.3;
  double noise_seconds = 20.0;
  uint64_t seed = 0;
};

namespace detail {

constexpr double kFs = kCanonicalSampleRate;

// F1, F2, F3 in Hz.
constexpr std::array<std::array<double, 3>, 6> kVowels{{
    {730, 1090, 2440},  // a
    {270, 2290, 3010},  // i
    {300, 870, 2240},   // u
    {530, 1840, 2480},  // e
    {570, 840, 2410},   // o
    {660, 1720, 2410},  // ae
}};
constexpr std::array<double, 3> kBandwidths{90, 110, 170};

// Two-pole resonator with unit gain at its center frequency, updated per
// sample so frequencies can glide.
class Resonator {
 public:
  double operator()(double x, double freq, double bw) {
    const double r = std::exp(-std::numbers::pi * bw / kFs);
    const double theta = 2.0 * std::numbers::pi * freq / kFs;
    const double a1 = 2.0 * r * std::cos(theta), a2 = -r * r;
    const double gain = (1.0 - r) * std::sqrt(1.0 - 2.0 * r * std::cos(2.0 * theta) + r * r);
    const double y = gain * x + a1 * y1_ + a2 * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double y1_ = 0.0, y2_ = 0.0;
};

inline void normalize_peak(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m > 0.0)
    for (double& v : x) v *= peak / m;
}

}  // namespace detail

/// One utterance: 3 to 6 segments, each a vowel (voiced) or a fricative.
inline Waveform synthesize_utterance(const SpeakerVoice& voice, Rng& rng, double seconds) {
  using namespace detail;
  const size_t n = static_cast<size_t>(seconds * kFs);
  const int segments = 3 + static_cast<int>(rng.uniform_int(4));
  struct Seg {
    bool voiced;
    std::array<double, 3> formants;
  };
  std::vector<Seg> segs;
  for (int s = 0; s < segments; ++s) {
    const bool voiced = s == 0 || rng.uniform() < 0.75;
    auto f = kVowels[rng.uniform_int(kVowels.size())];
    for (double& v : f) v *= voice.formant_scale * rng.uniform(0.96, 1.04);
    segs.push_back({voiced, f});
  }
  const double pitch_rate = rng.uniform(1.5, 3.5), pitch_depth = rng.uniform(0.04, 0.12);
  const double pitch_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double f0 = voice.f0_hz * rng.uniform(0.94, 1.06);

  std::vector<double> out(n);
  Resonator res[3];
  Resonator fric;
  double phase = 0.0;
  const double seg_len = static_cast<double>(n) / segments;
  for (size_t i = 0; i < n; ++i) {
    const double pos = static_cast<double>(i) / seg_len;
    const int k = std::min(segments - 1, static_cast<int>(pos));
    const double within = pos - k;
    // Glide formants over the last 30% of each segment into the next one.
    const int k2 = std::min(segments - 1, k + 1);
    const double blend = within > 0.7 ? (within - 0.7) / 0.3 : 0.0;
    std::array<double, 3> f;
    for (int j = 0; j < 3; ++j) f[j] = (1 - blend) * segs[k].formants[j] + blend * segs[k2].formants[j];
    const double t = static_cast<double>(i) / kFs;
    const double pitch = f0 * (1.0 + pitch_depth * std::sin(2 * std::numbers::pi * pitch_rate * t + pitch_phase));
    phase += pitch / kFs;
    double excitation;
    if (segs[k].voiced) {
      excitation = 0.0;
      if (phase >= 1.0) {
        phase -= 1.0;
        excitation = 1.0;
      }
      excitation += 0.02 * rng.normal();
      double y = excitation;
      for (int j = 0; j < 3; ++j) y = res[j](y, f[j], kBandwidths[j]);
      out[i] = y;
    } else {
      excitation = rng.normal();
      out[i] = 0.25 * fric(excitation, 4200.0 * voice.formant_scale, 1500.0);
    }
    // Short fades at segment boundaries avoid clicks.
    const double edge = std::min(within, 1.0 - within) * seg_len / (0.01 * kFs);
    out[i] *= std::min(1.0, edge + 0.3);
  }
  normalize_peak(out, 0.5);
  // Global fade in/out and a faint background floor so silence is not exact.
  const size_t fade = static_cast<size_t>(0.03 * kFs);
  for (size_t i = 0; i < std::min(fade, n); ++i) {
    const double g = static_cast<double>(i) / static_cast<double>(fade);
    out[i] *= g;
    out[n - 1 - i] *= g;
  }
  for (double& v : out) v += 1e-4 * rng.normal();
  return {std::move(out), kCanonicalSampleRate};
}

/// "hum": brown noise plus mains hum with slow amplitude modulation.
inline Waveform synthesize_hum(Rng& rng, double seconds) {
  using namespace detail;
  const size_t n = static_cast<size_t>(seconds * kFs);
  std::vector<double> out(n);
  double brown = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kFs;
    brown = 0.995 * brown + 0.05 * rng.normal();
    const double hum = std::sin(2 * std::numbers::pi * 50 * t) + 0.5 * std::sin(2 * std::numbers::pi * 100 * t) +
                       0.3 * std::sin(2 * std::numbers::pi * 150 * t);
    out[i] = (brown + 0.3 * hum) * (1.0 + 0.5 * std::sin(2 * std::numbers::pi * 0.5 * t));
  }
  normalize_peak(out, 0.5);
  return {std::move(out), kCanonicalSampleRate};
}

/// "hiss": high-passed white noise with a resonance near 3 kHz.
inline Waveform synthesize_hiss(Rng& rng, double seconds) {
  using namespace detail;
  const size_t n = static_cast<size_t>(seconds * kFs);
  std::vector<double> out(n);
  Resonator peak;
  double prev = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double w = rng.normal();
    const double hp = w - prev;
    prev = w;
    out[i] = 0.5 * hp + 2.0 * peak(w, 3000.0, 400.0);
  }
  normalize_peak(out, 0.5);
  return {std::move(out), kCanonicalSampleRate};
}

struct CorpusLayout {
  std::filesystem::path clean_dir;
  std::filesystem::path noise_dir;
  size_t num_utterances = 0;
  size_t num_noise_types = 0;
};

/// Writes clean_dir/<speaker>/<speaker>_<nnn>.wav and noise_dir/{hum,hiss}.wav
/// under `root`. Deterministic in opts.seed.
inline CorpusLayout write_corpus(const std::filesystem::path& root, const CorpusOptions& opts = {}) {
  require(!opts.speakers.empty() && opts.utterances_per_speaker > 0, "toy corpus needs speakers and utterances");
  require(opts.min_seconds > 0.1 && opts.max_seconds >= opts.min_seconds, "invalid utterance duration range");
  CorpusLayout layout{root / "clean", root / "noise", 0, 2};
  for (size_t s = 0; s < opts.speakers.size(); ++s) {
    const auto& voice = opts.speakers[s];
    const auto dir = layout.clean_dir / voice.name;
    std::filesystem::create_directories(dir);
    for (int u = 0; u < opts.utterances_per_speaker; ++u) {
      Rng rng(derive_seed(opts.seed, {1, s, static_cast<uint64_t>(u)}));
      const double secs = rng.uniform(opts.min_seconds, opts.max_seconds);
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%03d.wav", voice.name.c_str(), u);
      save_waveform(dir / name, synthesize_utterance(voice, rng, secs));
      ++layout.num_utterances;
    }
  }
  std::filesystem::create_directories(layout.noise_dir);
  Rng hum_rng(derive_seed(opts.seed, {2, 0})), hiss_rng(derive_seed(opts.seed, {2, 1}));
  save_waveform(layout.noise_dir / "hum.wav", synthesize_hum(hum_rng, opts.noise_seconds));
  save_waveform(layout.noise_dir / "hiss.wav", synthesize_hiss(hiss_rng, opts.noise_seconds));
  return layout;
}

}  // namespace nrvc::toy
