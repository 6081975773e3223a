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

// Checkpoint container, all integers little-endian:
//
//   8 bytes   magic "NRVCCKPT"
//   u32       format version (1)
//   u32       metadata length N
//   N bytes   metadata, UTF-8 JSON (keys sorted, compact)
//   u32       tensor count
//   per tensor, in ascending name order:
//     u32 name length L, L bytes name,
//     u32 rows, u32 cols, rows*cols float32 in row-major order
//
// Tensor names: "param/<parameter>", "buffer/feature_mean",
// "buffer/feature_std", and optimizer moments "adam_m/<parameter>",
// "adam_v/<parameter>". Encoding is a pure function of the contents, so
// load -> save reproduces the file byte for byte.

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "nrvc/audio/feature_cache.hpp"
#include "nrvc/model/model.hpp"

namespace nrvc {

inline constexpr char kCheckpointMagic[8] = {'N', 'R', 'V', 'C', 'C', 'K', 'P', 'T'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::map<std::string, RowMatrixXf> tensors;
};

inline std::string encode_checkpoint(const Checkpoint& c) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  le::put_u32(out, kCheckpointVersion);
  const std::string meta = c.metadata.dump();
  le::put_u32(out, static_cast<uint32_t>(meta.size()));
  out += meta;
  le::put_u32(out, static_cast<uint32_t>(c.tensors.size()));
  for (const auto& [name, m] : c.tensors) {
    le::put_u32(out, static_cast<uint32_t>(name.size()));
    out += name;
    le::put_u32(out, static_cast<uint32_t>(m.rows()));
    le::put_u32(out, static_cast<uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) le::put_f32(out, m.data()[i]);
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 8, kCheckpointMagic, 8) != 0)
    throw IoError("checkpoint: bad magic");
  size_t pos = 8;
  const uint32_t version = le::get_u32(bytes, pos);
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  const uint32_t meta_len = le::get_u32(bytes, pos);
  if (pos + meta_len > bytes.size()) throw IoError("checkpoint: truncated metadata");
  Checkpoint c;
  try {
    c.metadata = nlohmann::json::parse(bytes.substr(pos, meta_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(std::string("checkpoint: bad metadata: ") + e.what());
  }
  pos += meta_len;
  const uint32_t count = le::get_u32(bytes, pos);
  for (uint32_t t = 0; t < count; ++t) {
    const uint32_t name_len = le::get_u32(bytes, pos);
    if (pos + name_len > bytes.size()) throw IoError("checkpoint: truncated tensor name");
    std::string name = bytes.substr(pos, name_len);
    pos += name_len;
    const uint32_t rows = le::get_u32(bytes, pos);
    const uint32_t cols = le::get_u32(bytes, pos);
    if (pos + 4ull * rows * cols > bytes.size()) throw IoError("checkpoint: truncated tensor " + name);
    RowMatrixXf m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = le::get_f32(bytes, pos);
    if (!c.tensors.emplace(std::move(name), std::move(m)).second)
      throw IoError("checkpoint: duplicate tensor");
  }
  if (pos != bytes.size()) throw IoError("checkpoint: trailing bytes");
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  le::write_file(path, encode_checkpoint(c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(le::read_file(path));
}

/// Copies parameters and normalization buffers into `c` (float32).
template <typename T>
void store_model(const VoiceConversionModel<T>& model, Checkpoint& c) {
  for (const auto& [name, v] : model.parameters().all())
    c.tensors["param/" + name] = v.value().template cast<float>();
  c.tensors["buffer/feature_mean"] = model.feature_mean().template cast<float>();
  c.tensors["buffer/feature_std"] = model.feature_std().template cast<float>();
}

/// Overwrites the model's parameters and buffers from `c`. Every parameter
/// must be present with the same shape.
template <typename T>
void restore_model(const Checkpoint& c, VoiceConversionModel<T>& model) {
  auto fetch = [&c](const std::string& key, Eigen::Index rows, Eigen::Index cols) {
    auto it = c.tensors.find(key);
    if (it == c.tensors.end())
      throw InvalidArgument("checkpoint does not match model config: missing " + key);
    if (it->second.rows() != rows || it->second.cols() != cols)
      throw InvalidArgument("checkpoint does not match model config: shape of " + key);
    return it->second.template cast<T>().eval();
  };
  for (const auto& [name, v] : model.parameters().all()) {
    auto copy = v;
    copy.mutable_value() = fetch("param/" + name, v.rows(), v.cols());
  }
  const auto mels = model.config().num_mels;
  model.set_feature_stats(fetch("buffer/feature_mean", 1, mels), fetch("buffer/feature_std", 1, mels));
}

}  // namespace nrvc
