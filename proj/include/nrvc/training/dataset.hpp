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
#include <string>
#include <unordered_map>
#include <vector>

#include "nrvc/audio/manifest.hpp"
#include "nrvc/audio/mel.hpp"
#include "nrvc/training/config.hpp"

namespace nrvc {

/// Log-mel features for every manifest entry, with each entry's clean pair.
class FeatureDataset {
 public:
  FeatureDataset() = default;

  /// Renders every entry (mixing noisy ones from their recipe) and extracts
  /// features.
  static FeatureDataset build(const Manifest& manifest, AudioStore& store) {
    validate_manifest(manifest);
    if (manifest.empty()) throw InvalidArgument("empty manifest");
    FeatureDataset d;
    d.entries_ = manifest;
    std::unordered_map<std::string, size_t> index;
    for (size_t i = 0; i < manifest.size(); ++i) index.emplace(manifest[i].utterance_id, i);
    d.features_.reserve(manifest.size());
    for (const auto& e : manifest) d.features_.push_back(mel_spectrogram(store.render(e)).values);
    d.clean_index_.resize(manifest.size());
    for (size_t i = 0; i < manifest.size(); ++i) {
      d.clean_index_[i] = index.at(manifest[i].clean_pair_id);
      require(d.features_[i].rows() == d.features_[d.clean_index_[i]].rows(),
              "noisy and clean features differ in length: " + manifest[i].utterance_id);
    }
    return d;
  }

  /// For tests: features supplied directly.
  static FeatureDataset from_features(Manifest manifest, std::vector<RowMatrixXf> features) {
    require(manifest.size() == features.size(), "one feature matrix per entry required");
    if (manifest.empty()) throw InvalidArgument("empty manifest");
    validate_manifest(manifest);
    FeatureDataset d;
    std::unordered_map<std::string, size_t> index;
    for (size_t i = 0; i < manifest.size(); ++i) index.emplace(manifest[i].utterance_id, i);
    d.clean_index_.resize(manifest.size());
    for (size_t i = 0; i < manifest.size(); ++i) d.clean_index_[i] = index.at(manifest[i].clean_pair_id);
    d.entries_ = std::move(manifest);
    d.features_ = std::move(features);
    return d;
  }

  size_t size() const { return entries_.size(); }
  const ManifestEntry& entry(size_t i) const { return entries_[i]; }
  const RowMatrixXf& input(size_t i) const { return features_[i]; }
  const RowMatrixXf& target(size_t i) const { return features_[clean_index_[i]]; }
  size_t clean_index(size_t i) const { return clean_index_[i]; }

  /// Per-channel mean and standard deviation over every frame of every entry.
  std::pair<RowMatrixXf, RowMatrixXf> channel_stats(float min_std = 1e-3f) const {
    const Eigen::Index c = features_.at(0).cols();
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(c), sq = Eigen::RowVectorXd::Zero(c);
    double n = 0;
    for (const auto& f : features_) {
      const RowMatrixXd d = f.cast<double>();
      sum += d.colwise().sum();
      sq += d.cwiseAbs2().colwise().sum();
      n += static_cast<double>(d.rows());
    }
    const Eigen::RowVectorXd mean = sum / n;
    const Eigen::RowVectorXd var = (sq / n - mean.cwiseAbs2()).cwiseMax(0.0);
    RowMatrixXf m = mean.cast<float>();
    RowMatrixXf s = var.cwiseSqrt().cast<float>().cwiseMax(min_std);
    return {m, s};
  }

 private:
  Manifest entries_;
  std::vector<RowMatrixXf> features_;
  std::vector<size_t> clean_index_;
};

/// One mini-batch. Inputs may be clean or noisy; targets are always the
/// clean pair, cropped at the same frames.
struct TrainBatch {
  std::vector<RowMatrixXf> input_mel;
  std::vector<RowMatrixXf> target_mel;
  std::vector<Domain> domain;
  std::vector<size_t> entry_index;
  std::vector<Eigen::Index> crop_offset;

  size_t size() const { return input_mel.size(); }
};

/// `frames` consecutive rows starting at `offset`; when the source is too
/// short it is repeated cyclically from its first row.
inline RowMatrixXf crop_frames(const RowMatrixXf& m, Eigen::Index offset, Eigen::Index frames) {
  RowMatrixXf out(frames, m.cols());
  for (Eigen::Index i = 0; i < frames; ++i) out.row(i) = m.row((offset + i) % m.rows());
  return out;
}

/// Samples batch_size entries uniformly with replacement and applies one
/// random crop of segment_frames to input and target alike.
inline TrainBatch make_batch(const FeatureDataset& data, const TrainConfig& cfg, Rng& rng) {
  if (data.size() == 0) throw InvalidArgument("make_batch: empty manifest");
  TrainBatch b;
  const Eigen::Index seg = cfg.segment_frames;
  for (int i = 0; i < cfg.batch_size; ++i) {
    const size_t k = static_cast<size_t>(rng.uniform_int(data.size()));
    const RowMatrixXf& in = data.input(k);
    const Eigen::Index frames = in.rows();
    const Eigen::Index off =
        frames > seg ? static_cast<Eigen::Index>(rng.uniform_int(static_cast<uint64_t>(frames - seg + 1))) : 0;
    b.input_mel.push_back(crop_frames(in, off, seg));
    b.target_mel.push_back(crop_frames(data.target(k), off, seg));
    b.domain.push_back(data.entry(k).domain);
    b.entry_index.push_back(k);
    b.crop_offset.push_back(off);
  }
  return b;
}

}  // namespace nrvc
