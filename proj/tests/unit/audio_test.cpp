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

#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include <unsupported/Eigen/FFT>
#include <gtest/gtest.h>

#include "nrvc/audio/feature_cache.hpp"
#include "nrvc/audio/manifest.hpp"
#include "nrvc/audio/mel.hpp"
#include "nrvc/audio/mix.hpp"
#include "nrvc/audio/resample.hpp"
#include "nrvc/audio/wav.hpp"
#include "nrvc/toy_corpus.hpp"
#include "test_support.hpp"

namespace nrvc {
namespace {

namespace fs = std::filesystem;

Waveform tone(double hz, double seconds, int rate, double amp = 0.5) {
  Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<size_t>(std::llround(seconds * rate));
  for (size_t i = 0; i < n; ++i) w.samples.push_back(amp * std::sin(2 * std::numbers::pi * hz * i / rate));
  return w;
}

Waveform white(size_t n, Rng& rng, double scale = 0.1) {
  Waveform w;
  for (size_t i = 0; i < n; ++i) w.samples.push_back(scale * rng.normal());
  return w;
}

double peak_frequency(const Waveform& w) {
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, w.samples);
  size_t best = 1;
  for (size_t k = 1; k < spec.size() / 2; ++k)
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  return static_cast<double>(best) * w.sample_rate / static_cast<double>(w.samples.size());
}

// ---- wav ----------------------------------------------------------------------

TEST(Wav, RoundTripWithinQuantization) {
  Rng rng(1);
  Waveform w = white(1234, rng, 0.3);
  for (double& s : w.samples) s = std::clamp(s, -1.0, 1.0);
  const auto dir = testing::scratch_dir("wav_roundtrip");
  save_waveform(dir / "a.wav", w);
  const Waveform back = load_waveform(dir / "a.wav");
  ASSERT_EQ(back.size(), w.size());
  EXPECT_EQ(back.sample_rate, kCanonicalSampleRate);
  for (size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(back.samples[i], w.samples[i], 1.0 / 32767);
}

TEST(Wav, KeepsSampleRate) {
  const auto dir = testing::scratch_dir("wav_rate");
  save_waveform(dir / "b.wav", tone(300, 0.1, 22050));
  EXPECT_EQ(load_waveform(dir / "b.wav").sample_rate, 22050);
}

TEST(Wav, RejectsGarbage) {
  const auto dir = testing::scratch_dir("wav_garbage");
  le::write_file(dir / "bad.wav", "definitely not a wave file");
  EXPECT_THROW(load_waveform(dir / "bad.wav"), IoError);
  EXPECT_THROW(load_waveform(dir / "missing.wav"), IoError);
}

// ---- resampling ---------------------------------------------------------------

TEST(Resample, ToneKeepsItsFrequency) {
  for (int rate : {8000, 22050, 44100}) {
    const Waveform r = resample(tone(440, 1.0, rate), kCanonicalSampleRate);
    EXPECT_EQ(r.sample_rate, kCanonicalSampleRate);
    EXPECT_EQ(r.size(), 16000u);
    EXPECT_NEAR(peak_frequency(r), 440.0, 1.0) << rate;
  }
}

TEST(Resample, PreservesInBandAmplitude) {
  const Waveform r = resample(tone(440, 1.0, 44100, 0.5), kCanonicalSampleRate);
  double peak = 0.0;
  for (size_t i = 2000; i < 14000; ++i) peak = std::max(peak, std::abs(r.samples[i]));
  EXPECT_NEAR(peak, 0.5, 0.01);
}

TEST(Resample, SameRateIsIdentity) {
  Rng rng(2);
  const Waveform w = white(500, rng);
  EXPECT_EQ(resample(w, kCanonicalSampleRate).samples, w.samples);
}

TEST(Resample, RemovesContentAboveNewNyquist) {
  const Waveform r = resample(tone(11000, 1.0, 44100), kCanonicalSampleRate);
  EXPECT_LT(signal_power(std::span<const double>(r.samples).subspan(2000, 12000)), 1e-5);
}

// ---- mixing -------------------------------------------------------------------

TEST(Mix, GainHandValue) {
  // Equal power at 20 dB needs a gain of 0.1.
  EXPECT_NEAR(snr_gain(1.0, 1.0, 20.0), 0.1, 1e-12);
  EXPECT_NEAR(snr_gain(4.0, 1.0, 0.0), 2.0, 1e-12);
}

TEST(Mix, ZeroPowerIsRejected) {
  EXPECT_THROW(snr_gain(0.0, 1.0, 10.0), InvalidArgument);
  EXPECT_THROW(snr_gain(1.0, 0.0, 10.0), InvalidArgument);
}

TEST(Mix, MeasuredSnrMatchesRequestOnRandomCases) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Waveform clean = white(2000 + rng.uniform_int(3000), rng, rng.uniform(0.01, 0.2));
    const Waveform noise = white(500 + rng.uniform_int(8000), rng, rng.uniform(0.01, 0.5));
    const double snr = rng.uniform(5.0, 20.0);
    const MixResult m = mix_at_snr(clean, noise, snr, rng);
    ASSERT_EQ(m.mixture.size(), clean.size());
    ASSERT_EQ(m.clipped, 0u);
    std::vector<double> added(clean.size());
    for (size_t t = 0; t < clean.size(); ++t) added[t] = m.mixture.samples[t] - clean.samples[t];
    EXPECT_NEAR(measured_snr_db(clean.samples, added), snr, 1e-6);
    EXPECT_NEAR(measured_snr_db(clean.samples, m.noise_segment) + 20 * std::log10(1.0 / m.gain), snr, 1e-9);
  }
}

TEST(Mix, ShortNoiseWrapsAround) {
  const std::vector<double> noise{1, 2, 3};
  EXPECT_EQ(align_noise(noise, 7, 1), (std::vector<double>{2, 3, 1, 2, 3, 1, 2}));
  Rng rng(4);
  EXPECT_EQ(random_noise_offset(3, 7, rng), 0u);
}

TEST(Mix, LongNoiseOffsetStaysInRange) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) EXPECT_LE(random_noise_offset(100, 60, rng), 40u);
}

// ---- features -----------------------------------------------------------------

TEST(Mel, OneSecondGives81Frames) {
  const MelSpectrogram m = mel_spectrogram(tone(200, 1.0, kCanonicalSampleRate));
  EXPECT_EQ(m.num_frames(), 81);
  EXPECT_EQ(m.values.cols(), kNumMels);
}

TEST(Mel, FrameCountSweep) {
  Rng rng(6);
  for (size_t n : {200u, 399u, 400u, 1000u, 4321u, 16000u}) {
    const MelSpectrogram m = mel_spectrogram(white(n, rng));
    EXPECT_EQ(m.num_frames(), static_cast<Eigen::Index>(1 + n / 200)) << n;
  }
}

TEST(Mel, SilenceHitsTheFloor) {
  Waveform w;
  w.samples.assign(4000, 0.0);
  const MelSpectrogram m = mel_spectrogram(w);
  EXPECT_NEAR(m.values.maxCoeff(), std::log(kPowerFloor), 1e-4);
  EXPECT_NEAR(m.values.minCoeff(), std::log(kPowerFloor), 1e-4);
}

TEST(Mel, ToneEnergyLandsNearItsBand) {
  const MelSpectrogram m = mel_spectrogram(tone(1000, 0.5, kCanonicalSampleRate));
  Eigen::Index best;
  m.values.row(20).maxCoeff(&best);
  const double lo = mel_to_hz(hz_to_mel(0) + (hz_to_mel(8000) - hz_to_mel(0)) * (best - 1) / (kNumMels + 1));
  const double hi = mel_to_hz(hz_to_mel(0) + (hz_to_mel(8000) - hz_to_mel(0)) * (best + 3) / (kNumMels + 1));
  EXPECT_LT(lo, 1000.0);
  EXPECT_GT(hi, 1000.0);
}

TEST(Mel, EveryFilterHasSupport) {
  const RowMatrixXd fb = mel_filterbank();
  EXPECT_EQ(fb.rows(), kNumMels);
  EXPECT_EQ(fb.cols(), kFftSize / 2 + 1);
  for (Eigen::Index m = 0; m < fb.rows(); ++m) EXPECT_GT(fb.row(m).sum(), 0.0) << m;
  EXPECT_GE(fb.minCoeff(), 0.0);
}

TEST(Mel, RejectsWrongRate) {
  EXPECT_THROW(mel_spectrogram(tone(200, 0.2, 8000)), InvalidArgument);
}

TEST(FeatureCache, RoundTripIsExact) {
  Rng rng(7);
  const MelSpectrogram m = mel_spectrogram(white(3000, rng));
  const auto dir = testing::scratch_dir("features");
  save_features(dir / "f.bin", m);
  EXPECT_EQ(load_features(dir / "f.bin").values, m.values);
  le::write_file(dir / "short.bin", le::read_file(dir / "f.bin").substr(0, 20));
  EXPECT_THROW(load_features(dir / "short.bin"), IoError);
}

// ---- manifests ----------------------------------------------------------------

class ManifestTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(testing::scratch_dir("manifest_corpus"));
    toy::CorpusOptions opt;
    opt.utterances_per_speaker = 3;
    opt.noise_seconds = 4.0;
    opt.seed = 5;
    layout_ = new toy::CorpusLayout(toy::write_corpus(*root_, opt));
  }
  static void TearDownTestSuite() {
    delete layout_;
    delete root_;
  }

  ManifestOptions options(int augmentations = 2, uint64_t seed = 9) const {
    ManifestOptions o;
    o.clean_dir = layout_->clean_dir;
    o.noise_dir = layout_->noise_dir;
    o.augmentations = augmentations;
    o.seed = seed;
    return o;
  }

  static fs::path* root_;
  static toy::CorpusLayout* layout_;
};

fs::path* ManifestTest::root_ = nullptr;
toy::CorpusLayout* ManifestTest::layout_ = nullptr;

TEST_F(ManifestTest, CountsFollowAugmentations) {
  for (int k : {0, 1, 2}) {
    const Manifest m = build_manifest(options(k));
    size_t clean = 0, noisy = 0;
    for (const auto& e : m) (e.is_noisy() ? noisy : clean)++;
    EXPECT_EQ(clean, 6u);
    EXPECT_EQ(noisy, 6u * static_cast<size_t>(k));
  }
}

TEST_F(ManifestTest, DeterministicInSeed) {
  EXPECT_EQ(serialize_manifest(build_manifest(options(2, 9))), serialize_manifest(build_manifest(options(2, 9))));
  EXPECT_NE(serialize_manifest(build_manifest(options(2, 9))), serialize_manifest(build_manifest(options(2, 10))));
}

TEST_F(ManifestTest, SnrInsideRangeAndTypesDistinct) {
  const Manifest m = build_manifest(options(2));
  std::map<std::string, std::set<std::string>> types;
  for (const auto& e : m) {
    if (!e.is_noisy()) {
      EXPECT_FALSE(e.noise_type.has_value());
      EXPECT_FALSE(e.snr_db.has_value());
      continue;
    }
    ASSERT_TRUE(e.snr_db.has_value());
    EXPECT_GE(*e.snr_db, 5.0);
    EXPECT_LE(*e.snr_db, 20.0);
    EXPECT_TRUE(types[e.clean_pair_id].insert(*e.noise_type).second);
  }
  EXPECT_EQ(types.size(), 6u);
}

TEST_F(ManifestTest, TooManyAugmentationsRejected) {
  EXPECT_THROW(build_manifest(options(3)), InvalidArgument);
}

TEST_F(ManifestTest, InvertedSnrRangeRejected) {
  auto o = options();
  o.snr_min = 20;
  o.snr_max = 5;
  EXPECT_THROW(build_manifest(o), InvalidArgument);
}

TEST_F(ManifestTest, NoisyEntryIsCleanPlusScaledNoise) {
  const Manifest m = build_manifest(options(2));
  std::map<std::string, const ManifestEntry*> clean;
  for (const auto& e : m)
    if (!e.is_noisy()) clean[e.utterance_id] = &e;
  AudioStore store;
  for (const auto& e : m) {
    if (!e.is_noisy()) continue;
    MixResult mix;
    const Waveform noisy = store.render(e, &mix);
    const Waveform c = store.render(*clean.at(e.clean_pair_id));
    ASSERT_EQ(noisy.size(), c.size());
    EXPECT_EQ(e.speaker_id, clean.at(e.clean_pair_id)->speaker_id);
    EXPECT_EQ(mix.clipped, 0u);
    std::vector<double> added(c.size());
    for (size_t t = 0; t < c.size(); ++t) {
      added[t] = noisy.samples[t] - c.samples[t];
      EXPECT_NEAR(added[t], mix.gain * mix.noise_segment[t], 1e-12);
    }
    EXPECT_NEAR(measured_snr_db(c.samples, added), *e.snr_db, 1e-6);
  }
}

TEST_F(ManifestTest, SerializationRoundTrip) {
  const Manifest m = build_manifest(options(2));
  std::istringstream in(serialize_manifest(m));
  EXPECT_EQ(serialize_manifest(parse_manifest(in)), serialize_manifest(m));
}

TEST_F(ManifestTest, BrokenPairingRejected) {
  Manifest m = build_manifest(options(1));
  m[1].clean_pair_id = "nope";
  EXPECT_THROW(validate_manifest(m), InvalidArgument);
  Manifest n = build_manifest(options(1));
  n[1].snr_db.reset();
  EXPECT_THROW(validate_manifest(n), InvalidArgument);
}

TEST_F(ManifestTest, RegionsDoNotOverlap) {
  const auto train = noise_region_bounds(1000, 0.75, NoiseRegion::kTrain);
  const auto test = noise_region_bounds(1000, 0.75, NoiseRegion::kTest);
  EXPECT_EQ(train.first, 0u);
  EXPECT_EQ(train.second, test.first);
  EXPECT_EQ(test.second, 1000u);
}

}  // namespace
}  // namespace nrvc
