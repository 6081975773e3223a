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
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "nrvc/audio/mel.hpp"

namespace nrvc {

inline constexpr int kNumCepstra = 40;

/// Mel-cepstral coefficients 1..40 per frame (the 0th is dropped).
struct MccSequence {
  RowMatrixXd frames;

  Eigen::Index size() const { return frames.rows(); }
};

/// Orthonormal DCT-II matrix, n_out x n_in, rows are basis functions.
inline RowMatrixXd dct2_matrix(int n_in, int n_out) {
  RowMatrixXd d(n_out, n_in);
  for (int k = 0; k < n_out; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n_in);
    for (int n = 0; n < n_in; ++n)
      d(k, n) = scale * std::cos(std::numbers::pi * k * (2 * n + 1) / (2.0 * n_in));
  }
  return d;
}

/// Cepstra from a log-mel matrix (frames x mels): DCT-II across mel bands,
/// keeping coefficients 1..40.
inline MccSequence mcc_from_log_mel(const RowMatrixXd& log_mel) {
  require(log_mel.rows() >= 1 && log_mel.cols() > kNumCepstra, "mcc: log-mel too small");
  static const RowMatrixXd basis = dct2_matrix(kNumMels, kNumCepstra + 1);
  const RowMatrixXd& d = log_mel.cols() == kNumMels ? basis : dct2_matrix(log_mel.cols(), kNumCepstra + 1);
  const RowMatrixXd all = log_mel * d.transpose();
  return {all.rightCols(kNumCepstra)};
}

/// Same framing as mel_spectrogram(); computed in double precision.
inline MccSequence extract_mcc(const Waveform& w) {
  return mcc_from_log_mel(default_mel_analyzer().log_mel(w));
}

struct DtwResult {
  double total_cost = 0.0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> path;
};

/// Euclidean frame distance.
inline double frame_distance(const RowMatrixXd& a, Eigen::Index i, const RowMatrixXd& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).norm();
}

/// Minimum-total-cost monotone, contiguous alignment from (0,0) to
/// (n-1,m-1) with steps (1,0), (0,1), (1,1).
inline DtwResult dtw(const RowMatrixXd& a, const RowMatrixXd& b) {
  require(a.rows() > 0 && b.rows() > 0, "dtw: empty sequence");
  require(a.cols() == b.cols(), "dtw: dimension mismatch");
  const Eigen::Index n = a.rows(), m = b.rows();
  constexpr double inf = std::numeric_limits<double>::infinity();
  RowMatrixXd acc = RowMatrixXd::Constant(n, m, inf);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = frame_distance(a, i, b, j);
      if (i == 0 && j == 0) {
        acc(i, j) = d;
        continue;
      }
      double best = inf;
      if (i > 0 && j > 0) best = acc(i - 1, j - 1);
      if (i > 0) best = std::min(best, acc(i - 1, j));
      if (j > 0) best = std::min(best, acc(i, j - 1));
      acc(i, j) = best + d;
    }
  }
  DtwResult r;
  r.total_cost = acc(n - 1, m - 1);
  Eigen::Index i = n - 1, j = m - 1;
  r.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    // Tie order: diagonal, then advance in a, then in b.
    if (i > 0 && j > 0 && acc(i - 1, j - 1) <= acc(i - 1, j) && acc(i - 1, j - 1) <= acc(i, j - 1)) {
      --i;
      --j;
    } else if (i > 0 && (j == 0 || acc(i - 1, j) <= acc(i, j - 1))) {
      --i;
    } else {
      --j;
    }
    r.path.emplace_back(i, j);
  }
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

/// 10/ln10 * sqrt(2 * sum of squared differences) for one frame pair.
inline double mcd_frame(const RowMatrixXd& a, Eigen::Index i, const RowMatrixXd& b, Eigen::Index j) {
  return 10.0 / std::numbers::ln10 * std::sqrt(2.0) * frame_distance(a, i, b, j);
}

/// Mel-cepstral distortion in dB, averaged over the DTW path.
inline double mcd(const MccSequence& conv, const MccSequence& targ) {
  require(conv.size() > 0 && targ.size() > 0, "mcd: empty sequence");
  const DtwResult r = dtw(conv.frames, targ.frames);
  double sum = 0.0;
  for (const auto& [i, j] : r.path) sum += mcd_frame(conv.frames, i, targ.frames, j);
  return sum / static_cast<double>(r.path.size());
}

}  // namespace nrvc
