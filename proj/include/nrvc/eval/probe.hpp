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

// Linear domain probe: how well can a fresh logistic-regression classifier
// tell clean from noisy inputs given only a representation?
//
// Samples are grouped by clean pair, and whole groups go to the same fold, so
// a clean utterance and its noisy copy are never split between train and
// test. Test accuracy is pooled over k folds.

#pragma once

#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "nrvc/model/model.hpp"
#include "nrvc/training/dataset.hpp"

namespace nrvc {

enum class ProbeKind { kSpeaker, kContent, kMel };

inline std::string to_string(ProbeKind k) {
  switch (k) {
    case ProbeKind::kSpeaker: return "speaker";
    case ProbeKind::kContent: return "content";
    case ProbeKind::kMel: return "mel";
  }
  return "?";
}

inline ProbeKind probe_kind_from_string(const std::string& s) {
  if (s == "speaker") return ProbeKind::kSpeaker;
  if (s == "content") return ProbeKind::kContent;
  if (s == "mel") return ProbeKind::kMel;
  throw InvalidArgument("unknown representation kind: " + s);
}

/// Representation rows with domain labels (0 clean, 1 noisy), the clean-pair
/// group of each row, and its speaker.
struct LabeledFeatures {
  RowMatrixXd x;
  std::vector<int> label;
  std::vector<int> group;
  std::vector<std::string> speaker;

  size_t size() const { return label.size(); }
};

struct ProbeOptions {
  int folds = 5;
  double l2 = 1e-3;
  int max_iterations = 50;
  uint64_t seed = 0;
};

struct ProbeReport {
  std::string kind;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  size_t train_samples = 0;  // per fold, averaged
  size_t test_samples = 0;   // pooled over folds
  size_t clean_samples = 0;
  size_t noisy_samples = 0;
  int folds = 0;
};

inline nlohmann::json to_json(const ProbeReport& r) {
  return {{"kind", r.kind},
          {"train_accuracy", r.train_accuracy},
          {"test_accuracy", r.test_accuracy},
          {"train_samples", r.train_samples},
          {"test_samples", r.test_samples},
          {"clean_samples", r.clean_samples},
          {"noisy_samples", r.noisy_samples},
          {"folds", r.folds},
          {"split", "grouped by clean pair"}};
}

/// L2-regularized logistic regression on standardized features, fit by
/// Newton's method. The bias is not penalized.
class LogisticProbe {
 public:
  void fit(const RowMatrixXd& x, const std::vector<int>& y, double l2, int max_iterations) {
    require(x.rows() == static_cast<Eigen::Index>(y.size()) && x.rows() > 0, "probe: bad training data");
    mean_ = x.colwise().mean();
    const Eigen::RowVectorXd var = (x.rowwise() - mean_).cwiseAbs2().colwise().mean();
    scale_ = var.unaryExpr([](double v) { return v > 1e-12 ? 1.0 / std::sqrt(v) : 0.0; });
    const RowMatrixXd z = design(x);
    const Eigen::Index d = z.cols();
    const double n = static_cast<double>(z.rows());
    Eigen::VectorXd t(z.rows());
    for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = y[static_cast<size_t>(i)];
    w_ = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd reg = Eigen::VectorXd::Constant(d, l2);
    reg(d - 1) = 1e-9;
    for (int it = 0; it < max_iterations; ++it) {
      const Eigen::VectorXd p = (z * w_).unaryExpr([](double a) { return 1.0 / (1.0 + std::exp(-a)); });
      const Eigen::VectorXd g = z.transpose() * (p - t) / n + reg.cwiseProduct(w_);
      const Eigen::VectorXd s = p.cwiseProduct(Eigen::VectorXd::Ones(p.size()) - p);
      Eigen::MatrixXd h = z.transpose() * s.asDiagonal() * z / n;
      h.diagonal() += reg;
      const Eigen::VectorXd step = h.ldlt().solve(g);
      w_ -= step;
      if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
    }
  }

  std::vector<int> predict(const RowMatrixXd& x) const {
    const Eigen::VectorXd a = design(x) * w_;
    std::vector<int> out(static_cast<size_t>(a.size()));
    for (Eigen::Index i = 0; i < a.size(); ++i) out[static_cast<size_t>(i)] = a(i) > 0.0 ? 1 : 0;
    return out;
  }

 private:
  RowMatrixXd design(const RowMatrixXd& x) const {
    RowMatrixXd z(x.rows(), x.cols() + 1);
    z.leftCols(x.cols()) = (x.rowwise() - mean_).array().rowwise() * scale_.array();
    z.col(x.cols()).setOnes();
    return z;
  }

  Eigen::RowVectorXd mean_, scale_;
  Eigen::VectorXd w_;
};

namespace probe_detail {

inline RowMatrixXd take_rows(const RowMatrixXd& x, const std::vector<size_t>& idx) {
  RowMatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

inline std::vector<int> take(const std::vector<int>& v, const std::vector<size_t>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (size_t i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace probe_detail

/// Grouped k-fold probe over labeled features.
inline ProbeReport run_probe(const LabeledFeatures& f, const std::string& kind, const ProbeOptions& opt = {}) {
  require(f.x.rows() == static_cast<Eigen::Index>(f.size()) && f.group.size() == f.size(),
          "probe: inconsistent feature table");
  require(opt.folds >= 2, "probe: need at least 2 folds");
  ProbeReport r;
  r.kind = kind;
  r.folds = opt.folds;
  for (int l : f.label) (l == 0 ? r.clean_samples : r.noisy_samples)++;
  if (r.clean_samples < 10 || r.noisy_samples < 10)
    throw InvalidArgument("probe: fewer than 10 samples per domain");

  std::vector<int> groups(f.group);
  std::sort(groups.begin(), groups.end());
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
  require(groups.size() >= static_cast<size_t>(opt.folds), "probe: fewer groups than folds");
  Rng rng(derive_seed(opt.seed, {0x70726f6265ULL}));
  for (size_t i = groups.size(); i > 1; --i) std::swap(groups[i - 1], groups[rng.uniform_int(i)]);
  std::map<int, int> fold_of;
  for (size_t i = 0; i < groups.size(); ++i) fold_of[groups[i]] = static_cast<int>(i % static_cast<size_t>(opt.folds));

  size_t test_hits = 0, test_total = 0, train_total = 0;
  double train_acc = 0.0;
  for (int k = 0; k < opt.folds; ++k) {
    std::vector<size_t> tr, te;
    for (size_t i = 0; i < f.size(); ++i) (fold_of.at(f.group[i]) == k ? te : tr).push_back(i);
    const auto ytr = probe_detail::take(f.label, tr);
    LogisticProbe probe;
    probe.fit(probe_detail::take_rows(f.x, tr), ytr, opt.l2, opt.max_iterations);
    const auto ptr = probe.predict(probe_detail::take_rows(f.x, tr));
    size_t hits = 0;
    for (size_t i = 0; i < ptr.size(); ++i) hits += ptr[i] == ytr[i];
    train_acc += static_cast<double>(hits) / static_cast<double>(tr.size());
    train_total += tr.size();
    const auto pte = probe.predict(probe_detail::take_rows(f.x, te));
    for (size_t i = 0; i < te.size(); ++i) test_hits += pte[i] == f.label[te[i]];
    test_total += te.size();
  }
  r.train_accuracy = train_acc / opt.folds;
  r.test_accuracy = static_cast<double>(test_hits) / static_cast<double>(test_total);
  r.train_samples = train_total / static_cast<size_t>(opt.folds);
  r.test_samples = test_total;
  return r;
}

/// Indices of a class-balanced subset: every clean entry that has a noisy
/// copy, plus the first such copy.
inline std::vector<size_t> balanced_pairs(const FeatureDataset& data) {
  std::map<size_t, size_t> first_noisy;
  for (size_t i = 0; i < data.size(); ++i)
    if (data.entry(i).domain == Domain::kNoisy) first_noisy.try_emplace(data.clean_index(i), i);
  std::vector<size_t> out;
  for (const auto& [clean, noisy] : first_noisy) {
    out.push_back(clean);
    out.push_back(noisy);
  }
  return out;
}

/// Representations of the balanced subset. Speaker: one row per utterance.
/// Content: one row per frame of the posterior mean. Mel: one row per frame
/// of the raw log-mel input.
template <typename T>
LabeledFeatures collect_representations(const VoiceConversionModel<T>* model, const FeatureDataset& data,
                                        ProbeKind kind) {
  require(model != nullptr || kind == ProbeKind::kMel, "probe: model required for this kind");
  LabeledFeatures f;
  std::vector<RowMatrixXd> rows;
  for (size_t i : balanced_pairs(data)) {
    MelSpectrogram mel{data.input(i)};
    RowMatrixXd r;
    switch (kind) {
      case ProbeKind::kSpeaker: r = model->speaker_embedding(mel).vector.template cast<double>(); break;
      case ProbeKind::kContent: r = model->content_posterior(mel).mean.template cast<double>(); break;
      case ProbeKind::kMel: r = mel.values.cast<double>(); break;
    }
    for (Eigen::Index k = 0; k < r.rows(); ++k) {
      f.label.push_back(domain_index(data.entry(i).domain));
      f.group.push_back(static_cast<int>(data.clean_index(i)));
      f.speaker.push_back(data.entry(i).speaker_id);
    }
    rows.push_back(std::move(r));
  }
  Eigen::Index total = 0;
  for (const auto& r : rows) total += r.rows();
  require(!rows.empty(), "probe: manifest has no clean/noisy pairs");
  f.x.resize(total, rows.front().cols());
  Eigen::Index at = 0;
  for (const auto& r : rows) {
    f.x.middleRows(at, r.rows()) = r;
    at += r.rows();
  }
  return f;
}

template <typename T>
ProbeReport domain_probe(const VoiceConversionModel<T>* model, const FeatureDataset& data, ProbeKind kind,
                         const ProbeOptions& opt = {}) {
  return run_probe(collect_representations(model, data, kind), to_string(kind), opt);
}

}  // namespace nrvc
