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

// Per-utterance feature file:
//   int32 rows, int32 cols (little-endian), then rows*cols float32 values in
//   row-major order (little-endian). No padding, no trailer.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "nrvc/audio/mel.hpp"

namespace nrvc {

namespace le {

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<uint32_t>(f)); }

inline uint32_t get_u32(const std::string& in, size_t& pos) {
  if (pos + 4 > in.size()) throw IoError("unexpected end of binary data");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}
inline float get_f32(const std::string& in, size_t& pos) {
  return std::bit_cast<float>(get_u32(in, pos));
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace le

inline std::string encode_features(const RowMatrixXf& m) {
  std::string out;
  out.reserve(8 + 4 * static_cast<size_t>(m.size()));
  le::put_u32(out, static_cast<uint32_t>(static_cast<int32_t>(m.rows())));
  le::put_u32(out, static_cast<uint32_t>(static_cast<int32_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.size(); ++i) le::put_f32(out, m.data()[i]);
  return out;
}

inline RowMatrixXf decode_features(const std::string& bytes) {
  size_t pos = 0;
  const auto rows = static_cast<int32_t>(le::get_u32(bytes, pos));
  const auto cols = static_cast<int32_t>(le::get_u32(bytes, pos));
  if (rows < 0 || cols < 0) throw IoError("feature file: negative shape");
  if (bytes.size() != 8 + 4 * static_cast<size_t>(rows) * static_cast<size_t>(cols))
    throw IoError("feature file: size does not match shape header");
  RowMatrixXf m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = le::get_f32(bytes, pos);
  return m;
}

inline void save_features(const std::filesystem::path& path, const MelSpectrogram& mel) {
  le::write_file(path, encode_features(mel.values));
}

inline MelSpectrogram load_features(const std::filesystem::path& path) {
  MelSpectrogram m;
  m.values = decode_features(le::read_file(path));
  return m;
}

}  // namespace nrvc
