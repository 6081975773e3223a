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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "nrvc/eval/probe.hpp"

namespace nrvc {

/// Top-2 principal-component projection of centered rows.
struct Projection {
  RowMatrixXd points;        // n x 2
  Eigen::Vector2d variance;  // eigenvalues of the two kept components
  double explained = 0.0;    // their share of total variance
};

/// Each axis is signed so that its largest-magnitude loading is positive.
inline Projection pca_2d(const RowMatrixXd& x) {
  require(x.rows() >= 3, "projection needs at least 3 vectors");
  require(x.cols() >= 1 && x.allFinite(), "projection: invalid representations");
  const RowMatrixXd c = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);  // ascending
  const double total = ev.sum();
  if (!(total > 1e-12 * std::max(1.0, c.cwiseAbs().maxCoeff()))) throw InvalidArgument("projection: rank-0 data");
  const Eigen::Index d = ev.size();
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(x.cols(), 2);
  Projection p;
  for (int k = 0; k < 2 && k < d; ++k) {
    Eigen::VectorXd v = es.eigenvectors().col(d - 1 - k);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    basis.col(k) = v;
    p.variance(k) = ev(d - 1 - k);
  }
  if (d < 2) p.variance(1) = 0.0;
  p.points = c * basis;
  p.explained = (p.variance(0) + p.variance(1)) / total;
  return p;
}

struct ProjectionRow {
  double x, y;
  int domain;
  std::string speaker;
};

inline std::vector<ProjectionRow> export_projection(const LabeledFeatures& f) {
  const Projection p = pca_2d(f.x);
  std::vector<ProjectionRow> rows;
  for (size_t i = 0; i < f.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    rows.push_back({p.points(r, 0), p.points(r, 1), f.label[i], f.speaker[i]});
  }
  return rows;
}

inline void write_projection_csv(const std::filesystem::path& path, const std::vector<ProjectionRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "x,y,domain,speaker\n";
  out.precision(9);
  for (const auto& r : rows) out << r.x << ',' << r.y << ',' << (r.domain ? "noisy" : "clean") << ',' << r.speaker << '\n';
}

}  // namespace nrvc
