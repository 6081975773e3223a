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
#include <numbers>

#include <gtest/gtest.h>

#include "nrvc/objectives.hpp"
#include "nrvc/training/trainer.hpp"
#include "test_support.hpp"

namespace nrvc {
namespace {

using testing::MatD;

MatD mat(std::initializer_list<std::initializer_list<double>> rows) {
  MatD m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

MelSpectrogram mel_of(const MatD& m) { return {m.cast<float>()}; }

TEST(ReconLoss, IdentityIsZero) {
  Rng rng(1);
  const auto a = mel_of(testing::random_matrix(4, 256, rng));
  EXPECT_EQ(recon_loss(a, a), 0.0);
}

TEST(ReconLoss, ConstantOffsetGivesOffset) {
  const MatD a = MatD::Zero(3, 256);
  EXPECT_DOUBLE_EQ(recon_loss(mel_of(a.array() + 1.0), mel_of(a)), 1.0);
}

TEST(ReconLoss, HandExample) {
  auto a = ag::constant<double>(mat({{0, 1}, {2, 3}}));
  auto b = ag::constant<double>(mat({{1, 1}, {1, 1}}));
  EXPECT_DOUBLE_EQ(recon_loss(a, b).scalar(), 1.0);
}

TEST(ReconLoss, Symmetric) {
  Rng rng(2);
  const auto a = mel_of(testing::random_matrix(5, 256, rng));
  const auto b = mel_of(testing::random_matrix(5, 256, rng));
  EXPECT_EQ(recon_loss(a, b), recon_loss(b, a));
}

TEST(ReconLoss, ShapeMismatchThrows) {
  EXPECT_THROW(recon_loss(mel_of(MatD::Zero(3, 256)), mel_of(MatD::Zero(4, 256))), InvalidArgument);
}

TEST(KlLoss, HandValues) {
  EXPECT_EQ(kl_loss<double>(MatD::Zero(3, 4), MatD::Zero(3, 4)), 0.0);
  EXPECT_DOUBLE_EQ(kl_loss<double>(mat({{1}}), mat({{0}})), 0.5);
  // 0.5 * (4 - 1 - ln 4)
  EXPECT_NEAR(kl_loss<double>(mat({{0}}), mat({{std::log(4.0)}})), 0.80685, 1e-5);
}

TEST(KlLoss, SumsDimensionsAndAveragesFrames) {
  // Two frames with per-frame KL 0.5 and 1.0 (one and two unit means).
  EXPECT_DOUBLE_EQ(kl_loss<double>(mat({{1, 0}, {1, 1}}), MatD::Zero(2, 2)), 0.75);
}

TEST(KlLoss, NonNegativeOnRandomPosteriors) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const MatD mu = testing::random_matrix(3, 5, rng, 2.0);
    const MatD lv = testing::random_matrix(3, 5, rng, 3.0);
    EXPECT_GE(kl_loss<double>(mu, lv), 0.0);
  }
}

TEST(KlLoss, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  const MatD mu = testing::random_matrix(4, 3, rng);
  const MatD lv = testing::random_matrix(4, 3, rng);
  const auto g_mu = testing::analytic_gradient([&](const ag::Var<double>& m) { return kl_loss(m, ag::constant<double>(lv)); }, mu);
  const auto n_mu = testing::numeric_gradient([&](const MatD& m) { return kl_loss<double>(m, lv); }, mu);
  EXPECT_LT(testing::max_relative_error(g_mu, n_mu, 1e-3), 1e-4);
  const auto g_lv = testing::analytic_gradient([&](const ag::Var<double>& l) { return kl_loss(ag::constant<double>(mu), l); }, lv);
  const auto n_lv = testing::numeric_gradient([&](const MatD& l) { return kl_loss<double>(mu, l); }, lv);
  EXPECT_LT(testing::max_relative_error(g_lv, n_lv, 1e-3), 1e-4);
}

TEST(KlLoss, NonFiniteInputThrows) {
  EXPECT_THROW(kl_loss<double>(mat({{NAN}}), mat({{0}})), InvalidArgument);
}

TEST(DomainLoss, UniformLogitsGiveLn2) {
  EXPECT_NEAR(domain_loss<double>(mat({{0, 0}}), Domain::kClean), std::numbers::ln2, 1e-8);
  EXPECT_NEAR(domain_loss<double>(mat({{0, 0}}), Domain::kNoisy), std::numbers::ln2, 1e-8);
}

TEST(DomainLoss, ConfidentCorrectIsNearZero) {
  EXPECT_LT(domain_loss<double>(mat({{20, -20}}), Domain::kClean), 1e-8);
}

TEST(DomainLoss, HandExample) {
  // -log(e^0 / (e^1 + e^0))
  EXPECT_NEAR(domain_loss<double>(mat({{1, 0}}), Domain::kNoisy), 1.3133, 1e-4);
}

TEST(DomainLoss, AveragesOverFrames) {
  const double a = domain_loss<double>(mat({{1, 0}}), Domain::kNoisy);
  const double b = domain_loss<double>(mat({{0, 0}}), Domain::kNoisy);
  EXPECT_NEAR(domain_loss<double>(mat({{1, 0}, {0, 0}}), Domain::kNoisy), (a + b) / 2, 1e-12);
}

TEST(DomainLoss, ShiftInvariant) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const MatD l = testing::random_matrix(4, 2, rng, 3.0);
    const double c = rng.uniform(-50, 50);
    EXPECT_NEAR(domain_loss<double>(l, Domain::kNoisy), domain_loss<double>(MatD(l.array() + c), Domain::kNoisy), 1e-6);
  }
}

TEST(TotalLoss, PaperWeightsHandExample) {
  const LossWeights w;
  EXPECT_EQ(w.alpha, 10.0);
  EXPECT_EQ(w.beta, 0.5);
  EXPECT_EQ(w.gamma, 0.1);
  EXPECT_EQ(w.tau, 0.1);
  EXPECT_EQ(total_loss(1, 2, 3, 4, w).total, 10.0 * 1 + 0.5 * 2 + 0.1 * 3 + 0.1 * 4);
  EXPECT_NEAR(total_loss(1, 2, 3, 4, w).total, 11.7, 1e-12);
}

TEST(TotalLoss, TrivialCases) {
  EXPECT_EQ(total_loss(0, 0, 0, 0, LossWeights{}).total, 0.0);
  EXPECT_EQ(total_loss(2, 5, 7, 9, LossWeights{1, 0, 0, 0}).total, 2.0);
}

TEST(TotalLoss, TauWeightsContentAndGammaWeightsSpeaker) {
  EXPECT_EQ(total_loss(0, 0, 1, 0, LossWeights{0, 0, 0, 3}).total, 3.0);
  EXPECT_EQ(total_loss(0, 0, 0, 1, LossWeights{0, 0, 2, 0}).total, 2.0);
}

TEST(TotalLoss, GraphMatchesScalarExpression) {
  const LossWeights w;
  auto c = [](double v) { return ag::constant<double>(MatD::Constant(1, 1, v)); };
  EXPECT_EQ(weighted_total(c(1), c(2), c(3), c(4), w).scalar(), total_loss(1, 2, 3, 4, w).total);
}

TEST(LossWeights, NegativeRejected) {
  EXPECT_THROW((LossWeights{1, -1, 0, 0}).validate(), InvalidArgument);
}

// ---- gradient routing ----------------------------------------------------------

TrainBatch routing_batch(Rng& rng) {
  TrainBatch b;
  for (int i = 0; i < 3; ++i) {
    const RowMatrixXf clean = testing::random_matrix(10, 256, rng).cast<float>();
    const Domain d = i == 1 ? Domain::kClean : Domain::kNoisy;
    RowMatrixXf in = clean;
    if (d == Domain::kNoisy) in += testing::random_matrix(10, 256, rng, 0.5).cast<float>();
    b.input_mel.push_back(in);
    b.target_mel.push_back(clean);
    b.domain.push_back(d);
    b.entry_index.push_back(static_cast<size_t>(i));
    b.crop_offset.push_back(0);
  }
  return b;
}

using GradMap = std::map<std::string, MatD>;

GradMap gradients_with(const LossWeights& w) {
  TrainConfig cfg;
  cfg.model = testing::tiny_model_config();
  cfg.seed = 11;
  VoiceConversionModel<double> model(cfg.effective_model(), 5);
  Trainer<double> trainer(model, cfg);
  Rng rng(21);
  trainer.compute_gradients(routing_batch(rng), w);
  GradMap g;
  for (const auto& [name, p] : model.parameters().all()) g[name] = p.grad();
  return g;
}

double max_deviation(const GradMap& a, const GradMap& b, const std::string& prefix) {
  double worst = 0.0;
  for (const auto& [name, g] : a)
    if (name.rfind(prefix, 0) == 0) worst = std::max(worst, (g - b.at(name)).cwiseAbs().maxCoeff());
  return worst;
}

double max_magnitude(const GradMap& a, const std::string& prefix) {
  double worst = 0.0;
  for (const auto& [name, g] : a)
    if (name.rfind(prefix, 0) == 0) worst = std::max(worst, g.cwiseAbs().maxCoeff());
  return worst;
}

TEST(GradientRouting, EachNetworkSeesOnlyItsTerms) {
  const LossWeights full;
  const GradMap base = gradients_with(full);
  // Speaker encoder: recon and dat_zs only.
  EXPECT_LT(max_deviation(base, gradients_with({full.alpha, 0.0, full.gamma, 0.0}), "speaker_encoder."), 1e-7);
  // Content encoder: recon, kl and dat_zc only.
  EXPECT_LT(max_deviation(base, gradients_with({full.alpha, full.beta, 0.0, full.tau}), "content_encoder."), 1e-7);
  // Decoder: recon only.
  EXPECT_LT(max_deviation(base, gradients_with({full.alpha, 0.0, 0.0, 0.0}), "decoder."), 1e-7);
  // Each classifier: its own domain term only.
  EXPECT_LT(max_deviation(base, gradients_with({0.0, 0.0, full.gamma, 0.0}), "speaker_domain."), 1e-7);
  EXPECT_LT(max_deviation(base, gradients_with({0.0, 0.0, 0.0, full.tau}), "content_domain."), 1e-7);
}

TEST(GradientRouting, DroppedTermsActuallyMatter) {
  const LossWeights full;
  const GradMap base = gradients_with(full);
  EXPECT_GT(max_deviation(base, gradients_with({full.alpha, full.beta, 0.0, full.tau}), "speaker_encoder."), 1e-9);
  EXPECT_GT(max_deviation(base, gradients_with({full.alpha, full.beta, full.gamma, 0.0}), "content_encoder."), 1e-9);
  EXPECT_GT(max_magnitude(base, "decoder."), 0.0);
}

TEST(GradientRouting, EveryParameterReceivesAGradient) {
  const GradMap g = gradients_with(LossWeights{});
  for (const auto& [name, grad] : g) {
    EXPECT_TRUE(grad.allFinite()) << name;
    EXPECT_GT(grad.cwiseAbs().maxCoeff(), 0.0) << name;
  }
}

TEST(GradientRouting, EncoderReceivesReversedClassifierGradient) {
  // With only the content-domain term active, one small step along the
  // encoder gradient must increase the classifier's loss: the encoder works
  // against the classifier, which itself descends.
  TrainConfig cfg;
  cfg.model = testing::tiny_model_config();
  cfg.grl_lambda = 1.0;
  cfg.model.grl_lambda = 1.0;
  VoiceConversionModel<double> model(cfg.effective_model(), 5);
  Trainer<double> trainer(model, cfg);
  Rng rng(22);
  const TrainBatch batch = routing_batch(rng);
  const LossWeights only_zc{0.0, 0.0, 0.0, 1.0};
  const double before = trainer.compute_gradients(batch, only_zc).losses.dat_zc;
  for (const auto& [name, p] : model.parameters().all()) {
    if (name.rfind("content_encoder.", 0) != 0) continue;
    auto q = p;
    q.mutable_value() -= 1e-3 * p.grad();
  }
  const double after = trainer.compute_gradients(batch, only_zc).losses.dat_zc;
  EXPECT_GT(after, before);
}

}  // namespace
}  // namespace nrvc
