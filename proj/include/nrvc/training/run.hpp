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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nrvc/training/trainer.hpp"

namespace nrvc {

inline constexpr const char* kLossLogName = "loss_log.jsonl";
inline constexpr const char* kRunSummaryName = "run.json";

inline std::string checkpoint_name(int64_t step) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "checkpoint_%08lld.nrvc", static_cast<long long>(step));
  return buf;
}

struct RunResult {
  int64_t final_step = 0;
  std::filesystem::path final_checkpoint;
  std::optional<StepReport> last_report;
};

struct RunOptions {
  std::optional<std::filesystem::path> resume_from;
  /// Called after every step; may be empty.
  std::function<void(const StepReport&)> on_step;
};

namespace detail {

// Keeps log lines for steps before `step`, so a resumed run does not
// duplicate entries written after the checkpoint it resumes from.
inline void truncate_loss_log(const std::filesystem::path& path, int64_t step) {
  std::ifstream in(path);
  if (!in) return;
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("step")) continue;
    if (j["step"].get<int64_t>() < step) keep.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : keep) out << l << '\n';
}

}  // namespace detail

/// Trains on a dataset until cfg.max_steps total steps. Writes the loss log,
/// checkpoints every checkpoint_interval steps and at the end, and run.json.
inline RunResult train_run(const FeatureDataset& data, const TrainConfig& cfg,
                           const std::filesystem::path& out_dir, const RunOptions& opts = {}) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  VoiceConversionModel<float> model(cfg.effective_model(), derive_seed(cfg.seed, {kSeedModelInit}));
  Trainer<float> trainer(model, cfg);
  if (opts.resume_from) {
    trainer.restore(load_checkpoint(*opts.resume_from));
  } else {
    auto [mean, stddev] = data.channel_stats();
    model.set_feature_stats(mean, stddev);
  }

  const fs::path log_path = out_dir / kLossLogName;
  if (opts.resume_from)
    detail::truncate_loss_log(log_path, trainer.step_count());
  else
    std::ofstream(log_path, std::ios::trunc);
  std::ofstream log(log_path, std::ios::app);
  if (!log) throw IoError("cannot write " + log_path.string());

  RunResult result;
  auto save = [&](const std::optional<StepReport>& last) {
    Checkpoint c = trainer.checkpoint();
    c.metadata["last_losses"] = last ? to_json_line(*last) : nlohmann::json(nullptr);
    result.final_checkpoint = out_dir / checkpoint_name(trainer.step_count());
    save_checkpoint(result.final_checkpoint, c);
  };

  int64_t last_saved = -1;
  if (!opts.resume_from) {
    save(std::nullopt);
    last_saved = 0;
  }
  while (trainer.step_count() < cfg.max_steps) {
    const TrainBatch batch = trainer.next_batch(data);
    StepReport rep = trainer.step(batch);
    log << to_json_line(rep).dump() << '\n';
    log.flush();
    result.last_report = rep;
    if (opts.on_step) opts.on_step(rep);
    if (trainer.step_count() % cfg.checkpoint_interval == 0) {
      save(rep);
      last_saved = trainer.step_count();
    }
  }
  if (last_saved != trainer.step_count()) save(result.last_report);
  result.final_step = trainer.step_count();

  nlohmann::json summary{{"config", cfg},
                         {"final_step", result.final_step},
                         {"final_checkpoint", result.final_checkpoint.filename().string()},
                         {"num_entries", data.size()}};
  summary["final_losses"] = result.last_report ? to_json_line(*result.last_report) : nlohmann::json(nullptr);
  std::ofstream(out_dir / kRunSummaryName) << summary.dump(2) << '\n';
  return result;
}

/// Manifest-level entry point: renders features, then trains.
inline RunResult train_run(const Manifest& manifest, const TrainConfig& cfg,
                           const std::filesystem::path& out_dir, const RunOptions& opts = {}) {
  AudioStore store;
  const FeatureDataset data = FeatureDataset::build(manifest, store);
  return train_run(data, cfg, out_dir, opts);
}

}  // namespace nrvc
