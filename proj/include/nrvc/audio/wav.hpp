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
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "nrvc/common.hpp"

namespace nrvc {

inline constexpr int kCanonicalSampleRate = 16000;

/// Mono signal with samples nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kCanonicalSampleRate;

  size_t size() const { return samples.size(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }

  void validate() const {
    require(sample_rate > 0, "waveform: sample_rate must be positive");
    for (double s : samples)
      require(std::isfinite(s), "waveform: non-finite sample");
  }
};

namespace wav_detail {

inline uint32_t read_u32(const unsigned char* p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
         (uint32_t(p[3]) << 24);
}
inline uint16_t read_u16(const unsigned char* p) {
  return uint16_t(p[0] | (p[1] << 8));
}
inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace wav_detail

/// Reads a mono 16-bit PCM RIFF/WAVE file. Samples are scaled by 1/32768.
inline Waveform load_waveform(const std::filesystem::path& path) {
  using namespace wav_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw IoError(path.string() + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  uint16_t channels = 0, bits = 0, format = 0;
  uint32_t rate = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const uint32_t len = read_u32(chunk + 4);
    const size_t body = pos + 8;
    if (body + len > bytes.size() && std::memcmp(chunk, "data", 4) != 0)
      throw IoError(path.string() + ": truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16) throw IoError(path.string() + ": short fmt chunk");
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw IoError(path.string() + ": data chunk before fmt");
      // 0xFFFE is WAVE_FORMAT_EXTENSIBLE; accepted when it carries 16-bit PCM.
      if ((format != 1 && format != 0xFFFE) || bits != 16)
        throw IoError(path.string() + ": unsupported format (need 16-bit PCM)");
      if (channels != 1)
        throw IoError(path.string() + ": expected mono, got " +
                      std::to_string(channels) + " channels");
      if (rate == 0) throw IoError(path.string() + ": zero sample rate");
      const size_t avail = std::min<size_t>(len, bytes.size() - body);
      const size_t n = avail / 2;
      Waveform w;
      w.sample_rate = static_cast<int>(rate);
      w.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        const auto v = static_cast<int16_t>(read_u16(bytes.data() + body + 2 * i));
        w.samples[i] = v / 32768.0;
      }
      return w;
    }
    pos = body + len + (len & 1);
  }
  throw IoError(path.string() + ": no data chunk");
}

/// Quantizes one sample to 16-bit PCM, saturating outside [-1, 1).
inline int16_t quantize_pcm16(double x) {
  const double v = std::nearbyint(x * 32768.0);
  return static_cast<int16_t>(std::clamp(v, -32768.0, 32767.0));
}

/// Serializes to the canonical 44-byte-header WAV layout.
inline std::string encode_wav(const Waveform& w) {
  using namespace wav_detail;
  require(w.sample_rate > 0, "encode_wav: sample_rate must be positive");
  const uint32_t data_len = static_cast<uint32_t>(w.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<uint32_t>(w.sample_rate));
  put_u32(out, static_cast<uint32_t>(w.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_len);
  for (double s : w.samples) put_u16(out, static_cast<uint16_t>(quantize_pcm16(s)));
  return out;
}

inline void save_waveform(const std::filesystem::path& path, const Waveform& w) {
  const std::string bytes = encode_wav(w);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

/// Mean squared sample value.
inline double signal_power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

}  // namespace nrvc
