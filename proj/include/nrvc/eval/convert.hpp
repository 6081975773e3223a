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

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nrvc/audio/manifest.hpp"
#include "nrvc/eval/mcd.hpp"
#include "nrvc/training/trainer.hpp"

namespace nrvc {

/// Run-time condition: clean or noisy source, clean or noisy target. The
/// pipeline is the same for all four; the tag is bookkeeping.
enum class Scenario { kScTc, kScTn, kSnTc, kSnTn };

inline constexpr std::array<const char*, 4> kScenarioNames{"SC-TC", "SC-TN", "SN-TC", "SN-TN"};

inline std::string to_string(Scenario s) { return kScenarioNames[static_cast<size_t>(s)]; }

inline Scenario scenario_from_string(const std::string& s) {
  for (size_t i = 0; i < kScenarioNames.size(); ++i)
    if (s == kScenarioNames[i]) return static_cast<Scenario>(i);
  throw InvalidArgument("unknown scenario: " + s);
}

struct ConversionRequest {
  std::filesystem::path source_audio;
  std::filesystem::path target_audio;
  Scenario scenario = Scenario::kScTc;
  std::filesystem::path checkpoint;
};

/// Content from `source`, speaker from `target`, epsilon = 0, decoded
/// autoregressively. Output has the source's frame count.
template <typename T>
MelSpectrogram convert(const VoiceConversionModel<T>& model, const MelSpectrogram& source,
                       const MelSpectrogram& target) {
  source.validate();
  target.validate();
  const auto z_s = model.speaker_embedding(target);
  const auto post = model.content_posterior(source);
  const ContentSample<T> z_c{post.mean};
  return model.decode_mel(z_s, z_c);
}

inline MelSpectrogram convert(const ConversionRequest& req) {
  const auto model = model_from_checkpoint<float>(load_checkpoint(req.checkpoint));
  return convert(model, mel_spectrogram(load_canonical(req.source_audio)),
                 mel_spectrogram(load_canonical(req.target_audio)));
}

// ---- MCD evaluation over a pairs file --------------------------------------

/// One line per pair: {"converted": path, "reference": path, "id": optional}.
struct EvalPair {
  std::string id;
  std::filesystem::path converted;
  std::filesystem::path reference;
};

inline std::vector<EvalPair> read_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pairs file " + path.string());
  std::vector<EvalPair> pairs;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("converted") || !j.contains("reference"))
      throw InvalidArgument("pairs file line " + std::to_string(n) + ": expected {\"converted\", \"reference\"}");
    EvalPair p;
    p.converted = j["converted"].get<std::string>();
    p.reference = j["reference"].get<std::string>();
    p.id = j.value("id", std::to_string(pairs.size()));
    pairs.push_back(std::move(p));
  }
  require(!pairs.empty(), "pairs file is empty");
  return pairs;
}

struct EvalSummary {
  size_t pairs = 0;
  double mean_mcd_db = 0.0;
  double std_mcd_db = 0.0;
};

/// Writes one JSON line per pair and a final summary line.
inline EvalSummary evaluate_pairs(const std::vector<EvalPair>& pairs, const std::filesystem::path& report) {
  std::ofstream out(report);
  if (!out) throw IoError("cannot write " + report.string());
  std::vector<double> values;
  for (const auto& p : pairs) {
    const MccSequence a = extract_mcc(load_canonical(p.converted));
    const MccSequence b = extract_mcc(load_canonical(p.reference));
    const double v = mcd(a, b);
    values.push_back(v);
    out << nlohmann::json{{"id", p.id},
                          {"converted", p.converted.generic_string()},
                          {"reference", p.reference.generic_string()},
                          {"mcd_db", v},
                          {"frames_converted", a.size()},
                          {"frames_reference", b.size()},
                          {"alignment", "dtw"}}
               .dump()
        << '\n';
  }
  EvalSummary s;
  s.pairs = values.size();
  for (double v : values) s.mean_mcd_db += v;
  s.mean_mcd_db /= static_cast<double>(values.size());
  for (double v : values) s.std_mcd_db += (v - s.mean_mcd_db) * (v - s.mean_mcd_db);
  s.std_mcd_db = std::sqrt(s.std_mcd_db / static_cast<double>(values.size()));
  out << nlohmann::json{{"summary", true},
                        {"pairs", s.pairs},
                        {"mean_mcd_db", s.mean_mcd_db},
                        {"std_mcd_db", s.std_mcd_db},
                        {"alignment", "dtw"}}
             .dump()
      << '\n';
  return s;
}

}  // namespace nrvc
