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

// Acceptance runner: one PASS/FAIL line per criterion.
//
// Exit status is 0 when every selected criterion was evaluated, whatever its
// verdict, and 1 when one of them could not be evaluated. --strict also maps
// any FAIL to exit status 1.

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "nrvc/eval/convert.hpp"
#include "nrvc/eval/invert.hpp"
#include "nrvc/eval/mcd.hpp"
#include "nrvc/eval/probe.hpp"
#include "nrvc/toy_corpus.hpp"
#include "nrvc/training/run.hpp"
#include "test_support.hpp"

#ifndef NRVC_CLI_PATH
#error "NRVC_CLI_PATH must name the nrvc executable"
#endif

namespace nrvc::acceptance {
namespace {

namespace fs = std::filesystem;
using testing::MatD;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

struct Settings {
  fs::path work_dir;
  int64_t toy_steps = 10000;
  bool reuse = false;
};

// ---- 1. gradient reversal -------------------------------------------------------

Outcome grl_correctness() {
  Rng rng(101);
  double worst = 0.0;
  bool identity = true;
  for (int i = 0; i < 100; ++i) {
    const MatD x = testing::random_matrix(1 + rng.uniform_int(5), 1 + rng.uniform_int(5), rng);
    const MatD w = testing::random_matrix(x.rows(), x.cols(), rng);
    const std::function<ag::Var<double>(const ag::Var<double>&)> downstream = [&](const ag::Var<double>& v) {
      return ag::sum_all(ag::mul(ag::exp(ag::scale(v, 0.5)), ag::constant<double>(w)));
    };
    const MatD fd = testing::numeric_gradient([&](const MatD& m) { return testing::evaluate(downstream, m); }, x);
    for (double lambda : {0.0, 0.1, 1.0}) {
      {
        ag::NoGradGuard guard;
        identity = identity && ag::grad_reverse(ag::constant<double>(x), lambda).value() == x;
      }
      const MatD g = testing::analytic_gradient(
          [&](const ag::Var<double>& v) { return downstream(ag::grad_reverse(v, lambda)); }, x);
      const MatD expected = -lambda * fd;
      for (Eigen::Index k = 0; k < g.size(); ++k) {
        const double e = expected.data()[k];
        const double err = std::abs(g.data()[k] - e);
        worst = std::max(worst, e == 0.0 ? (err == 0.0 ? 0.0 : 1.0) : err / std::abs(e));
      }
    }
  }
  return {identity && worst < 1e-4, "forward bitwise identity=" + std::string(identity ? "yes" : "no") +
                                        " max relative gradient error=" + fmt(worst)};
}

// ---- 2. loss oracles ------------------------------------------------------------

Outcome loss_oracles() {
  const MatD z = MatD::Zero(1, 1);
  const double kl0 = kl_loss<double>(z, z);
  const double kl1 = kl_loss<double>(MatD::Ones(1, 1), z);
  const double kl2 = kl_loss<double>(z, MatD::Constant(1, 1, std::log(4.0)));
  const double total = total_loss(1, 2, 3, 4, LossWeights{}).total;
  const double uniform = domain_loss<double>(MatD::Zero(3, 2), Domain::kNoisy);
  const bool ok = kl0 == 0.0 && kl1 == 0.5 && std::abs(kl2 - 0.80685) < 1e-5 && total == 10.0 * 1 + 0.5 * 2 + 0.1 * 3 + 0.1 * 4 &&
                  std::abs(total - 11.7) < 1e-12 && std::abs(uniform - std::log(2.0)) < 1e-8;
  return {ok, "kl=" + fmt(kl0) + "," + fmt(kl1) + "," + fmt(kl2, 7) + " total=" + fmt(total, 10) +
                  " uniform domain loss=" + fmt(uniform, 10)};
}

// ---- 3. gradient routing --------------------------------------------------------

using GradMap = std::map<std::string, MatD>;

GradMap routing_gradients(const LossWeights& w) {
  TrainConfig cfg;
  cfg.model = testing::tiny_model_config();
  cfg.seed = 5;
  VoiceConversionModel<double> model(cfg.effective_model(), 7);
  Trainer<double> trainer(model, cfg);
  Rng rng(202);
  TrainBatch b;
  for (int i = 0; i < 4; ++i) {
    const RowMatrixXf clean = testing::random_matrix(12, kNumMels, rng).cast<float>();
    const Domain d = i % 2 ? Domain::kNoisy : Domain::kClean;
    RowMatrixXf in = clean;
    if (d == Domain::kNoisy) in += testing::random_matrix(12, kNumMels, rng, 0.5).cast<float>();
    b.input_mel.push_back(in);
    b.target_mel.push_back(clean);
    b.domain.push_back(d);
    b.entry_index.push_back(static_cast<size_t>(i));
    b.crop_offset.push_back(0);
  }
  trainer.compute_gradients(b, w);
  GradMap g;
  for (const auto& [name, p] : model.parameters().all()) g[name] = p.grad();
  return g;
}

Outcome gradient_routing() {
  const LossWeights f;
  const GradMap base = routing_gradients(f);
  struct Case {
    const char* prefix;
    LossWeights kept;
  };
  const Case cases[] = {{"speaker_encoder.", {f.alpha, 0, f.gamma, 0}},
                        {"content_encoder.", {f.alpha, f.beta, 0, f.tau}},
                        {"decoder.", {f.alpha, 0, 0, 0}},
                        {"speaker_domain.", {0, 0, f.gamma, 0}},
                        {"content_domain.", {0, 0, 0, f.tau}}};
  double worst = 0.0;
  for (const auto& c : cases) {
    const GradMap g = routing_gradients(c.kept);
    for (const auto& [name, grad] : base)
      if (name.rfind(c.prefix, 0) == 0) worst = std::max(worst, (grad - g.at(name)).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-7, "max deviation after zeroing foreign terms=" + fmt(worst)};
}

// ---- 4. SNR mixing --------------------------------------------------------------

Outcome snr_mixing() {
  Rng rng(303);
  double worst = 0.0;
  size_t clipped = 0;
  for (int i = 0; i < 50; ++i) {
    Waveform clean, noise;
    const size_t n = 4000 + rng.uniform_int(12000);
    for (size_t k = 0; k < n; ++k) clean.samples.push_back(0.02 * rng.normal());
    for (size_t k = 0, m = 1000 + rng.uniform_int(30000); k < m; ++k) noise.samples.push_back(rng.uniform(-1, 1));
    const double snr = rng.uniform(-10.0, 30.0);
    const MixResult r = mix_at_snr(clean, noise, snr, rng);
    clipped += r.clipped;
    std::vector<double> added(n);
    for (size_t k = 0; k < n; ++k) added[k] = r.mixture.samples[k] - clean.samples[k];
    worst = std::max(worst, std::abs(measured_snr_db(clean.samples, added) - snr));
  }
  return {worst < 1e-6 && clipped == 0, "max |measured - target| dB=" + fmt(worst) + " clipped=" + std::to_string(clipped)};
}

// ---- 5. MCD oracle --------------------------------------------------------------

double brute_force_dtw(const RowMatrixXd& a, const RowMatrixXd& b) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(Eigen::Index, Eigen::Index, double)> walk = [&](Eigen::Index i, Eigen::Index j, double cost) {
    cost += (a.row(i) - b.row(j)).norm();
    if (i == a.rows() - 1 && j == b.rows() - 1) {
      best = std::min(best, cost);
      return;
    }
    if (i + 1 < a.rows()) walk(i + 1, j, cost);
    if (j + 1 < b.rows()) walk(i, j + 1, cost);
    if (i + 1 < a.rows() && j + 1 < b.rows()) walk(i + 1, j + 1, cost);
  };
  walk(0, 0, 0.0);
  return best;
}

Outcome mcd_oracle() {
  Rng rng(404);
  const MccSequence a{testing::random_matrix(15, kNumCepstra, rng)};
  const double same = mcd(a, a);
  const double offset = mcd(a, MccSequence{(a.frames.array() + 0.1).matrix()});
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst)
    for (Eigen::Index n = 1; n <= 6; ++n)
      for (Eigen::Index m = 1; m <= 6; ++m) {
        const RowMatrixXd x = testing::random_matrix(n, 4, rng), y = testing::random_matrix(m, 4, rng);
        worst = std::max(worst, std::abs(dtw(x, y).total_cost - brute_force_dtw(x, y)));
      }
  return {same == 0.0 && std::abs(offset - 3.884) < 1e-3 && worst < 1e-9,
          "identical=" + fmt(same) + " offset case=" + fmt(offset, 7) + " dB, max DTW deviation from brute force=" + fmt(worst)};
}

// ---- 6. instance normalization --------------------------------------------------

Outcome instance_norm() {
  Rng rng(505);
  double worst_mean = 0.0, worst_var = 0.0, worst_shift = 0.0;
  ag::NoGradGuard guard;
  for (int i = 0; i < 100; ++i) {
    const MatD x = testing::random_matrix(8 + rng.uniform_int(100), 1 + rng.uniform_int(32), rng, rng.uniform(0.5, 5.0));
    const MatD y = ag::instance_norm(ag::constant<double>(x)).value();
    const Eigen::RowVectorXd mean = y.colwise().mean();
    const Eigen::RowVectorXd var = (y.rowwise() - mean).array().square().colwise().mean();
    worst_mean = std::max(worst_mean, mean.cwiseAbs().maxCoeff());
    worst_var = std::max(worst_var, (var.array() - 1.0).abs().maxCoeff());
    const Eigen::RowVectorXd shift = testing::random_matrix(1, x.cols(), rng, 10.0);
    const MatD shifted = ag::instance_norm(ag::constant<double>(MatD(x.rowwise() + shift))).value();
    worst_shift = std::max(worst_shift, (shifted - y).cwiseAbs().maxCoeff());
  }
  return {worst_mean < 1e-5 && worst_var < 1e-3 && worst_shift < 1e-5,
          "max |mean|=" + fmt(worst_mean) + " max |var-1|=" + fmt(worst_var) + " offset drift=" + fmt(worst_shift)};
}

// ---- 7 and 8. toy experiment ----------------------------------------------------

fs::path ensure_corpus(const Settings& s) {
  const fs::path root = s.work_dir / "toy_corpus";
  if (!fs::exists(root / "done")) {
    fs::remove_all(root);
    toy::write_corpus(root);
    std::ofstream(root / "done") << "ok\n";
  }
  return root;
}

Manifest toy_manifest(const fs::path& root, uint64_t seed, NoiseRegion region) {
  ManifestOptions o;
  o.clean_dir = root / "clean";
  o.noise_dir = root / "noise";
  o.seed = seed;
  o.region = region;
  return build_manifest(o);
}

TrainConfig toy_config(double lambda, int64_t steps) {
  TrainConfig c;
  c.grl_lambda = lambda;
  c.max_steps = steps;
  c.batch_size = 16;
  c.segment_frames = 32;
  c.optimizer.learning_rate = 1e-3;
  c.checkpoint_interval = std::max<int64_t>(steps, 1);
  c.seed = 0;
  ModelConfig& m = c.model;
  m.grl_lambda = lambda;
  m.bank_channels = 8;
  m.speaker_channels = 64;
  m.content_channels = 64;
  m.decoder_channels = 64;
  m.prenet_dim = 16;
  return c;
}

struct ToyRun {
  double recon_first = 0.0, recon_tail = 0.0;
  double probe_content = 0.0, probe_speaker = 0.0;
  double error_clean = 0.0, error_noisy = 0.0;
};

struct ToyExperiment {
  double probe_mel = 0.0;
  ToyRun dat, ablation;
};

ToyRun toy_run(const FeatureDataset& train, const FeatureDataset& eval, double lambda, const Settings& s) {
  const TrainConfig cfg = toy_config(lambda, s.toy_steps);
  const fs::path dir = s.work_dir / (lambda > 0 ? "toy_dat" : "toy_ablation");
  const fs::path ckpt = dir / checkpoint_name(cfg.max_steps);
  bool reuse = false;
  if (s.reuse && fs::exists(ckpt) && fs::exists(dir / kRunSummaryName)) {
    const auto summary = nlohmann::json::parse(testing::read_bytes(dir / kRunSummaryName));
    reuse = summary["config"] == nlohmann::json(cfg);
  }
  if (!reuse) {
    fs::remove_all(dir);
    train_run(train, cfg, dir);
  }

  ToyRun r;
  std::vector<double> recon;
  std::ifstream log(dir / kLossLogName);
  for (std::string line; std::getline(log, line);)
    if (!line.empty()) recon.push_back(nlohmann::json::parse(line)["recon"].get<double>());
  require(!recon.empty(), "toy run produced no log");
  r.recon_first = recon.front();
  const size_t tail = std::min<size_t>(100, recon.size());
  for (size_t i = recon.size() - tail; i < recon.size(); ++i) r.recon_tail += recon[i] / static_cast<double>(tail);

  const auto model = model_from_checkpoint<float>(load_checkpoint(ckpt));
  r.probe_content = domain_probe(&model, eval, ProbeKind::kContent).test_accuracy;
  r.probe_speaker = domain_probe(&model, eval, ProbeKind::kSpeaker).test_accuracy;
  size_t n_clean = 0, n_noisy = 0;
  for (size_t i = 0; i < eval.size(); ++i) {
    const MelSpectrogram in{eval.input(i)}, target{eval.target(i)};
    const double e = recon_loss(convert(model, in, in), target);
    if (eval.entry(i).is_noisy()) {
      r.error_noisy += e;
      ++n_noisy;
    } else {
      r.error_clean += e;
      ++n_clean;
    }
  }
  r.error_clean /= static_cast<double>(n_clean);
  r.error_noisy /= static_cast<double>(n_noisy);
  return r;
}

const ToyExperiment& toy_experiment(const Settings& s) {
  static std::optional<ToyExperiment> cached;
  if (cached) return *cached;
  const fs::path root = ensure_corpus(s);
  AudioStore store;
  const FeatureDataset train = FeatureDataset::build(toy_manifest(root, 1, NoiseRegion::kTrain), store);
  const FeatureDataset eval = FeatureDataset::build(toy_manifest(root, 2, NoiseRegion::kTest), store);
  ToyExperiment e;
  e.probe_mel = domain_probe<float>(nullptr, eval, ProbeKind::kMel).test_accuracy;
  e.dat = toy_run(train, eval, 0.1, s);
  e.ablation = toy_run(train, eval, 0.0, s);
  cached = e;
  return *cached;
}

Outcome toy_dat(const Settings& s) {
  const ToyExperiment& e = toy_experiment(s);
  const double gap_c = e.ablation.probe_content - e.dat.probe_content;
  const double gap_s = e.ablation.probe_speaker - e.dat.probe_speaker;
  const bool a = gap_c >= 0.15 && gap_s >= 0.15;
  const bool b = e.dat.probe_content <= 0.70 && e.dat.probe_speaker <= 0.70;
  const bool c = e.probe_mel >= 0.90;
  const bool d = e.dat.recon_tail <= 0.5 * e.dat.recon_first && e.ablation.recon_tail <= 0.5 * e.ablation.recon_first;
  auto mark = [](bool v) { return v ? "ok" : "FAIL"; };
  return {a && b && c && d,
          std::string("(a) ") + mark(a) + " probe gaps content=" + fmt(gap_c, 3) + " speaker=" + fmt(gap_s, 3) +
              " [DAT content=" + fmt(e.dat.probe_content, 3) + " speaker=" + fmt(e.dat.probe_speaker, 3) +
              "; no-DAT content=" + fmt(e.ablation.probe_content, 3) + " speaker=" + fmt(e.ablation.probe_speaker, 3) +
              "]; (b) " + mark(b) + "; (c) " + mark(c) + " mel probe=" + fmt(e.probe_mel, 3) + "; (d) " + mark(d) +
              " recon " + fmt(e.dat.recon_first, 3) + "->" + fmt(e.dat.recon_tail, 3) + " and " +
              fmt(e.ablation.recon_first, 3) + "->" + fmt(e.ablation.recon_tail, 3) + " (" +
              std::to_string(s.toy_steps) + " steps)"};
}

Outcome denoising(const Settings& s) {
  const ToyExperiment& e = toy_experiment(s);
  const double dat = e.dat.error_noisy / e.dat.error_clean;
  const double ablation = e.ablation.error_noisy / e.ablation.error_clean;
  return {dat <= 1.5 && ablation > dat,
          "noisy/clean error ratio DAT=" + fmt(dat) + " no-DAT=" + fmt(ablation) + " (models shared with criterion 7)"};
}

// ---- 9. end-to-end determinism --------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(NRVC_CLI_PATH) + " " + args + " >>" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome end_to_end(const Settings& s) {
  const fs::path root = ensure_corpus(s);
  const fs::path base = s.work_dir / "determinism";
  fs::remove_all(base);
  fs::create_directories(base);
  TrainConfig cfg;
  cfg.model = testing::tiny_model_config();
  cfg.max_steps = 100;
  cfg.batch_size = 4;
  cfg.segment_frames = 32;
  cfg.checkpoint_interval = 100;
  cfg.seed = 7;
  std::ofstream(base / "config.json") << nlohmann::json(cfg).dump(2);
  const fs::path log = base / "cli.log";
  const std::string src = (root / "clean" / "spk_low" / "spk_low_000.wav").string();
  const std::string tgt = (root / "clean" / "spk_high" / "spk_high_000.wav").string();
  std::vector<std::string> artifacts;
  for (const char* run : {"a", "b"}) {
    const fs::path d = base / run;
    fs::create_directories(d);
    int rc = run_cli("prepare --clean-dir " + (root / "clean").string() + " --noise-dir " + (root / "noise").string() +
                         " --seed 3 --out-manifest " + (d / "manifest.jsonl").string(),
                     log);
    rc = rc ? rc : run_cli("train --manifest " + (d / "manifest.jsonl").string() + " --config " + (base / "config.json").string() +
                               " --out-dir " + (d / "run").string(),
                           log);
    rc = rc ? rc : run_cli("convert --checkpoint " + (d / "run" / checkpoint_name(100)).string() + " --source " + src +
                               " --target " + tgt + " --scenario SC-TC --seed 1 --out-wav " + (d / "out.wav").string(),
                           log);
    if (rc != 0) return {false, std::string("CLI run ") + run + " exited with " + std::to_string(rc) + "; see " + log.string()};
    artifacts.push_back(testing::read_bytes(d / "manifest.jsonl"));
    artifacts.push_back(testing::read_bytes(d / "run" / kLossLogName));
    artifacts.push_back(testing::read_bytes(d / "out.wav"));
  }
  const bool manifests = artifacts[0] == artifacts[3], logs = artifacts[1] == artifacts[4], wavs = artifacts[2] == artifacts[5];
  const bool nonempty = !artifacts[0].empty() && !artifacts[1].empty() && artifacts[2].size() > 44;
  return {manifests && logs && wavs && nonempty, std::string("identical manifest=") + (manifests ? "yes" : "no") +
                                                     " loss log=" + (logs ? "yes" : "no") + " wav=" + (wavs ? "yes" : "no")};
}

// ---- 10. checkpoint round-trip --------------------------------------------------

Outcome checkpoint_round_trip(const Settings& s) {
  const fs::path root = ensure_corpus(s);
  const fs::path dir = s.work_dir / "roundtrip";
  fs::remove_all(dir);
  fs::create_directories(dir);
  AudioStore store;
  const FeatureDataset data = FeatureDataset::build(toy_manifest(root, 1, NoiseRegion::kTrain), store);
  TrainConfig cfg;
  cfg.model = testing::tiny_model_config();
  cfg.max_steps = 20;
  cfg.batch_size = 4;
  cfg.segment_frames = 32;
  cfg.seed = 11;
  const RunResult r = train_run(data, cfg, dir / "run");
  const Checkpoint first = load_checkpoint(r.final_checkpoint);
  save_checkpoint(dir / "resaved.nrvc", first);
  const bool bytes = testing::read_bytes(r.final_checkpoint) == testing::read_bytes(dir / "resaved.nrvc");

  const fs::path src = root / "clean" / "spk_low" / "spk_low_001.wav";
  const fs::path tgt = root / "clean" / "spk_high" / "spk_high_001.wav";
  const MelSpectrogram original = convert(ConversionRequest{src, tgt, Scenario::kScTc, r.final_checkpoint});
  const MelSpectrogram reloaded = convert(ConversionRequest{src, tgt, Scenario::kScTc, dir / "resaved.nrvc"});
  const bool same = original.values == reloaded.values;
  return {bytes && same, std::string("re-saved bytes identical=") + (bytes ? "yes" : "no") +
                             " conversion identical=" + (same ? "yes" : "no")};
}

}  // namespace
}  // namespace nrvc::acceptance

int main(int argc, char** argv) {
  using namespace nrvc::acceptance;
  CLI::App app{"nrvc acceptance criteria"};
  Settings s;
  s.work_dir = fs::temp_directory_path() / "nrvc_acceptance";
  std::vector<int> only;
  std::string report;
  bool strict = false;
  app.add_option("--work-dir", s.work_dir, "Scratch directory for corpora and runs")->capture_default_str();
  app.add_option("--toy-steps", s.toy_steps, "Training steps per toy run")->check(CLI::Range(1, 20000))->capture_default_str();
  app.add_flag("--reuse", s.reuse, "Reuse finished toy runs with an identical config");
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 10));
  app.add_option("--report", report, "Also write the result lines to this file");
  app.add_flag("--strict", strict, "Exit non-zero when any criterion fails");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(s.work_dir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"GRL correctness", grl_correctness},
      {"loss oracles", loss_oracles},
      {"gradient routing", gradient_routing},
      {"SNR mixing", snr_mixing},
      {"MCD oracle", mcd_oracle},
      {"instance normalization", instance_norm},
      {"toy DAT experiment", [&] { return toy_dat(s); }},
      {"denoising reconstruction", [&] { return denoising(s); }},
      {"end-to-end determinism", [&] { return end_to_end(s); }},
      {"checkpoint round-trip", [&] { return checkpoint_round_trip(s); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  std::ofstream out;
  if (!report.empty()) out.open(report);
  int failed = 0, errors = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.contains(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
      ++errors;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail << " ["
         << fmt(secs, 3) << " s]";
    std::cout << line.str() << std::endl;
    if (out) out << line.str() << '\n';
  }
  std::cout << "summary: " << failed << " failed" << std::endl;
  if (out) out << "summary: " << failed << " failed\n";
  return errors > 0 || (strict && failed > 0) ? 1 : 0;
}
