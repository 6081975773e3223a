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

// nrvc: prepare | train | convert | evaluate | probe | project
//
// Exit status: 0 success, 2 usage or invalid input, 1 runtime failure.
// On success each verb prints one summary line of space-separated key=value
// pairs, starting with the verb.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "nrvc/audio/feature_cache.hpp"
#include "nrvc/eval/convert.hpp"
#include "nrvc/eval/invert.hpp"
#include "nrvc/eval/probe.hpp"
#include "nrvc/eval/projection.hpp"
#include "nrvc/training/run.hpp"

namespace fs = std::filesystem;
using namespace nrvc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(9);
  s << v;
  return s.str();
}

struct PrepareArgs {
  std::string clean_dir, noise_dir, out_manifest, region = "train";
  double snr_min = 5.0, snr_max = 20.0, noise_train_fraction = 0.75;
  int augmentations = 1;
  uint64_t seed = 0;
};

int run_prepare(const PrepareArgs& a) {
  ManifestOptions o;
  o.clean_dir = a.clean_dir;
  o.noise_dir = a.noise_dir;
  o.snr_min = a.snr_min;
  o.snr_max = a.snr_max;
  o.noise_train_fraction = a.noise_train_fraction;
  o.augmentations = a.augmentations;
  o.seed = a.seed;
  o.region = a.region == "test" ? NoiseRegion::kTest : NoiseRegion::kTrain;
  const Manifest m = build_manifest(o);
  write_manifest(a.out_manifest, m);
  size_t clean = 0;
  for (const auto& e : m) clean += e.domain == Domain::kClean;
  std::cout << "prepare entries=" << m.size() << " clean=" << clean << " noisy=" << m.size() - clean
            << " manifest=" << a.out_manifest << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string manifest, config, out_dir, resume;
};

int run_train(const TrainArgs& a) {
  const TrainConfig cfg = read_train_config(a.config);
  RunOptions opts;
  if (!a.resume.empty()) opts.resume_from = fs::path(a.resume);
  const RunResult r = train_run(read_manifest(a.manifest), cfg, a.out_dir, opts);
  std::cout << "train steps=" << r.final_step << " checkpoint=" << r.final_checkpoint.generic_string();
  if (r.last_report) std::cout << " recon=" << fmt(r.last_report->losses.recon) << " total=" << fmt(r.last_report->losses.total);
  std::cout << '\n';
  return kExitOk;
}

struct ConvertArgs {
  std::string checkpoint, source, target, out_wav, out_mel, scenario = "SC-TC";
  int gl_iterations = 32;
  uint64_t seed = 0;
};

int run_convert(const ConvertArgs& a) {
  ConversionRequest req{a.source, a.target, scenario_from_string(a.scenario), a.checkpoint};
  const MelSpectrogram mel = convert(req);
  GriffinLimOptions gl;
  gl.iterations = a.gl_iterations;
  gl.seed = a.seed;
  const Waveform w = invert_to_waveform(mel, gl);
  save_waveform(a.out_wav, w);
  if (!a.out_mel.empty()) save_features(a.out_mel, mel);
  fs::path sidecar = a.out_wav;
  sidecar.replace_extension(".json");
  nlohmann::json meta{{"scenario", to_string(req.scenario)},
                      {"source", a.source},
                      {"target", a.target},
                      {"checkpoint", a.checkpoint},
                      {"frames", mel.num_frames()},
                      {"samples", w.size()},
                      {"sample_rate", w.sample_rate},
                      {"griffin_lim_iterations", gl.iterations},
                      {"seed", a.seed}};
  std::ofstream(sidecar) << meta.dump(2) << '\n';
  std::cout << "convert scenario=" << to_string(req.scenario) << " frames=" << mel.num_frames()
            << " samples=" << w.size() << " wav=" << a.out_wav << " sidecar=" << sidecar.generic_string() << '\n';
  return kExitOk;
}

int run_evaluate(const std::string& pairs_file, const std::string& out_report) {
  const EvalSummary s = evaluate_pairs(read_pairs(pairs_file), out_report);
  std::cout << "evaluate pairs=" << s.pairs << " mean_mcd_db=" << fmt(s.mean_mcd_db)
            << " std_mcd_db=" << fmt(s.std_mcd_db) << " report=" << out_report << '\n';
  return kExitOk;
}

struct ProbeArgs {
  std::string checkpoint, manifest, kind = "content", out_report, out_csv;
  int folds = 5;
  uint64_t seed = 0;
};

std::optional<VoiceConversionModel<float>> load_model_if(const std::string& checkpoint, ProbeKind kind) {
  if (checkpoint.empty()) {
    require(kind == ProbeKind::kMel, "--checkpoint is required for kind " + to_string(kind));
    return std::nullopt;
  }
  return model_from_checkpoint<float>(load_checkpoint(checkpoint));
}

FeatureDataset load_dataset(const std::string& manifest) {
  AudioStore store;
  return FeatureDataset::build(read_manifest(manifest), store);
}

int run_probe(const ProbeArgs& a) {
  const ProbeKind kind = probe_kind_from_string(a.kind);
  const auto model = load_model_if(a.checkpoint, kind);
  const FeatureDataset data = load_dataset(a.manifest);
  ProbeOptions opt;
  opt.folds = a.folds;
  opt.seed = a.seed;
  const ProbeReport r = domain_probe(model ? &*model : nullptr, data, kind, opt);
  if (!a.out_report.empty()) std::ofstream(a.out_report) << to_json(r).dump(2) << '\n';
  std::cout << "probe kind=" << r.kind << " test_accuracy=" << fmt(r.test_accuracy)
            << " train_accuracy=" << fmt(r.train_accuracy) << " samples=" << r.test_samples
            << " folds=" << r.folds << '\n';
  return kExitOk;
}

int run_project(const ProbeArgs& a) {
  const ProbeKind kind = probe_kind_from_string(a.kind);
  const auto model = load_model_if(a.checkpoint, kind);
  const FeatureDataset data = load_dataset(a.manifest);
  const LabeledFeatures f = collect_representations(model ? &*model : nullptr, data, kind);
  const Projection p = pca_2d(f.x);
  write_projection_csv(a.out_csv, export_projection(f));
  std::cout << "project kind=" << to_string(kind) << " points=" << f.size()
            << " explained_variance=" << fmt(p.explained) << " csv=" << a.out_csv << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise-robust voice conversion toolkit"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Build a paired clean/noisy manifest");
  prepare->add_option("--clean-dir", prep.clean_dir, "Directory of clean WAV files")->required();
  prepare->add_option("--noise-dir", prep.noise_dir, "Directory of noise WAV files")->required();
  prepare->add_option("--snr-min", prep.snr_min, "Lowest mixing SNR in dB")->capture_default_str();
  prepare->add_option("--snr-max", prep.snr_max, "Highest mixing SNR in dB")->capture_default_str();
  prepare->add_option("--out-manifest", prep.out_manifest, "Output manifest (JSON lines)")->required();
  prepare->add_option("--seed", prep.seed, "Random seed")->capture_default_str();
  prepare->add_option("--augmentations", prep.augmentations, "Noisy copies per utterance")->capture_default_str();
  prepare->add_option("--noise-region", prep.region, "Noise clip region: train or test")
      ->check(CLI::IsMember({"train", "test"}))
      ->capture_default_str();
  prepare->add_option("--noise-train-fraction", prep.noise_train_fraction, "Leading share of each noise clip used for training")
      ->capture_default_str();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--manifest", tr.manifest, "Training manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--config", tr.config, "Training config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--out-dir", tr.out_dir, "Output directory")->required();
  train->add_option("--resume", tr.resume, "Checkpoint to resume from")->check(CLI::ExistingFile);

  ConvertArgs cv;
  auto* conv = app.add_subcommand("convert", "Convert source content to the target voice");
  conv->add_option("--checkpoint", cv.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  conv->add_option("--source", cv.source, "Source utterance (content)")->required()->check(CLI::ExistingFile);
  conv->add_option("--target", cv.target, "Target utterance (speaker)")->required()->check(CLI::ExistingFile);
  conv->add_option("--out-wav", cv.out_wav, "Output WAV")->required();
  conv->add_option("--scenario", cv.scenario, "SC-TC, SC-TN, SN-TC or SN-TN")
      ->check(CLI::IsMember({"SC-TC", "SC-TN", "SN-TC", "SN-TN"}))
      ->capture_default_str();
  conv->add_option("--out-mel", cv.out_mel, "Also write the converted log-mel as a feature file");
  conv->add_option("--gl-iterations", cv.gl_iterations, "Phase reconstruction iterations")->capture_default_str();
  conv->add_option("--seed", cv.seed, "Seed for the initial phase")->capture_default_str();

  std::string pairs_file, out_report;
  auto* eval = app.add_subcommand("evaluate", "MCD over converted/reference pairs");
  eval->add_option("--pairs-file", pairs_file, "JSON lines with converted and reference paths")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--out-report", out_report, "Report (JSON lines)")->required();

  ProbeArgs pr;
  auto* probe = app.add_subcommand("probe", "Linear domain probe on representations");
  probe->add_option("--checkpoint", pr.checkpoint, "Model checkpoint (not needed for kind mel)")->check(CLI::ExistingFile);
  probe->add_option("--manifest", pr.manifest, "Paired manifest")->required()->check(CLI::ExistingFile);
  probe->add_option("--kind", pr.kind, "speaker, content or mel")
      ->check(CLI::IsMember({"speaker", "content", "mel"}))
      ->capture_default_str();
  probe->add_option("--out-report", pr.out_report, "Write the report as JSON");
  probe->add_option("--folds", pr.folds, "Cross-validation folds")->capture_default_str();
  probe->add_option("--seed", pr.seed, "Fold assignment seed")->capture_default_str();

  ProbeArgs pj;
  pj.kind = "speaker";
  auto* project = app.add_subcommand("project", "2-D principal-component projection of representations");
  project->add_option("--checkpoint", pj.checkpoint, "Model checkpoint (not needed for kind mel)")->check(CLI::ExistingFile);
  project->add_option("--manifest", pj.manifest, "Paired manifest")->required()->check(CLI::ExistingFile);
  project->add_option("--out-csv", pj.out_csv, "Output table x,y,domain,speaker")->required();
  project->add_option("--kind", pj.kind, "speaker, content or mel")
      ->check(CLI::IsMember({"speaker", "content", "mel"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*prepare) return run_prepare(prep);
    if (*train) return run_train(tr);
    if (*conv) return run_convert(cv);
    if (*eval) return run_evaluate(pairs_file, out_report);
    if (*probe) return run_probe(pr);
    if (*project) return run_project(pj);
  } catch (const NonFiniteLoss& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
