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

#include <cstdint>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "nrvc/model/config.hpp"
#include "nrvc/objectives.hpp"

namespace nrvc {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

/// Everything a training run needs. The JSON form uses these field names.
struct TrainConfig {
  LossWeights loss_weights;
  double grl_lambda = 0.1;
  AdamConfig optimizer;
  int batch_size = 16;
  int segment_frames = 128;
  int64_t max_steps = 10000;
  uint64_t seed = 0;
  int64_t checkpoint_interval = 1000;
  /// Linear KL warm-up over this many steps; 0 keeps beta constant.
  int64_t kl_anneal_steps = 0;
  ModelConfig model;

  void validate() const {
    loss_weights.validate();
    require(grl_lambda >= 0.0, "grl_lambda must be non-negative");
    require(optimizer.learning_rate >= 0.0, "learning rate must be non-negative");
    require(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 &&
                optimizer.beta2 < 1.0 && optimizer.epsilon > 0.0,
            "invalid optimizer settings");
    require(batch_size >= 1, "batch_size must be at least 1");
    require(segment_frames >= 2, "segment_frames must be at least 2");
    require(max_steps >= 0, "max_steps must be non-negative");
    require(checkpoint_interval >= 1, "checkpoint_interval must be at least 1");
    require(kl_anneal_steps >= 0, "kl_anneal_steps must be non-negative");
    model.validate();
  }

  /// The model config with the run's GRL scale.
  ModelConfig effective_model() const {
    ModelConfig m = model;
    m.grl_lambda = grl_lambda;
    return m;
  }
};

inline void to_json(nlohmann::json& j, const AdamConfig& a) {
  j = nlohmann::json{{"learning_rate", a.learning_rate},
                     {"beta1", a.beta1},
                     {"beta2", a.beta2},
                     {"epsilon", a.epsilon}};
}
inline void from_json(const nlohmann::json& j, AdamConfig& a) {
  AdamConfig d;
  a.learning_rate = j.value("learning_rate", d.learning_rate);
  a.beta1 = j.value("beta1", d.beta1);
  a.beta2 = j.value("beta2", d.beta2);
  a.epsilon = j.value("epsilon", d.epsilon);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"loss_weights", c.loss_weights},
                     {"grl_lambda", c.grl_lambda},
                     {"optimizer", c.optimizer},
                     {"batch_size", c.batch_size},
                     {"segment_frames", c.segment_frames},
                     {"max_steps", c.max_steps},
                     {"seed", c.seed},
                     {"checkpoint_interval", c.checkpoint_interval},
                     {"kl_anneal_steps", c.kl_anneal_steps},
                     {"model", c.model}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  static const char* known[] = {"loss_weights", "grl_lambda",     "optimizer",
                                "batch_size",   "segment_frames", "max_steps",
                                "seed",         "checkpoint_interval", "kl_anneal_steps",
                                "model"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    require(ok, "unknown config key: " + key);
  }
  TrainConfig d;
  c.loss_weights = j.value("loss_weights", d.loss_weights);
  c.grl_lambda = j.value("grl_lambda", d.grl_lambda);
  c.optimizer = j.value("optimizer", d.optimizer);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.segment_frames = j.value("segment_frames", d.segment_frames);
  c.max_steps = j.value("max_steps", d.max_steps);
  c.seed = j.value("seed", d.seed);
  c.checkpoint_interval = j.value("checkpoint_interval", d.checkpoint_interval);
  c.kl_anneal_steps = j.value("kl_anneal_steps", d.kl_anneal_steps);
  c.model = j.value("model", d.model);
  c.model.grl_lambda = c.grl_lambda;
}

inline TrainConfig read_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument("config " + path.string() + ": " + e.what());
  }
  TrainConfig c = j.get<TrainConfig>();
  c.validate();
  return c;
}

}  // namespace nrvc
