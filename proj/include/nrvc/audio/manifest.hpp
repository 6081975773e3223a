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

// Paired clean/noisy corpus manifest.
//
// One JSON object per line. Required keys: utterance_id, audio_path,
// speaker_id, domain (0 = clean, 1 = noisy), clean_pair_id, noise_type
// (null for clean), snr_db (null for clean). Noisy entries are mixing
// recipes rather than rendered files: audio_path names the clean source and
// noise_path / noise_region / noise_offset locate the noise segment, so the
// mixture is rebuilt sample-exactly by render_entry().

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "nrvc/audio/mix.hpp"
#include "nrvc/audio/resample.hpp"
#include "nrvc/audio/wav.hpp"

namespace nrvc {

enum class Domain : int { kClean = 0, kNoisy = 1 };

inline int domain_index(Domain d) { return static_cast<int>(d); }

inline Domain domain_from_index(int v) {
  require(v == 0 || v == 1, "domain label must be 0 (clean) or 1 (noisy)");
  return static_cast<Domain>(v);
}

/// Which part of every noise clip a manifest draws from.
enum class NoiseRegion { kTrain, kTest };

struct ManifestEntry {
  std::string utterance_id;
  std::string audio_path;
  std::string speaker_id;
  Domain domain = Domain::kClean;
  std::string clean_pair_id;
  std::optional<std::string> noise_type;
  std::optional<double> snr_db;
  // Mixing recipe, present for noisy entries only.
  std::string noise_path;
  NoiseRegion noise_region = NoiseRegion::kTrain;
  size_t noise_offset = 0;

  bool is_noisy() const { return domain == Domain::kNoisy; }
};

using Manifest = std::vector<ManifestEntry>;

inline nlohmann::json to_json(const ManifestEntry& e) {
  nlohmann::json j;
  j["utterance_id"] = e.utterance_id;
  j["audio_path"] = e.audio_path;
  j["speaker_id"] = e.speaker_id;
  j["domain"] = domain_index(e.domain);
  j["clean_pair_id"] = e.clean_pair_id;
  j["noise_type"] = e.noise_type ? nlohmann::json(*e.noise_type) : nlohmann::json(nullptr);
  j["snr_db"] = e.snr_db ? nlohmann::json(*e.snr_db) : nlohmann::json(nullptr);
  if (e.is_noisy()) {
    j["noise_path"] = e.noise_path;
    j["noise_region"] = e.noise_region == NoiseRegion::kTrain ? "train" : "test";
    j["noise_offset"] = e.noise_offset;
  }
  return j;
}

inline ManifestEntry entry_from_json(const nlohmann::json& j) {
  ManifestEntry e;
  try {
    e.utterance_id = j.at("utterance_id").get<std::string>();
    e.audio_path = j.at("audio_path").get<std::string>();
    e.speaker_id = j.at("speaker_id").get<std::string>();
    e.domain = domain_from_index(j.at("domain").get<int>());
    e.clean_pair_id = j.at("clean_pair_id").get<std::string>();
    if (!j.at("noise_type").is_null()) e.noise_type = j.at("noise_type").get<std::string>();
    if (!j.at("snr_db").is_null()) e.snr_db = j.at("snr_db").get<double>();
    if (e.is_noisy()) {
      e.noise_path = j.at("noise_path").get<std::string>();
      const auto region = j.value("noise_region", std::string("train"));
      require(region == "train" || region == "test", "noise_region must be train or test");
      e.noise_region = region == "train" ? NoiseRegion::kTrain : NoiseRegion::kTest;
      e.noise_offset = j.value("noise_offset", size_t{0});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidArgument(std::string("manifest entry: ") + ex.what());
  }
  return e;
}

/// Checks the pairing invariants: noisy <=> noise_type and snr_db present, and
/// every clean_pair_id resolves to a clean entry.
inline void validate_manifest(const Manifest& m) {
  std::unordered_map<std::string, const ManifestEntry*> by_id;
  for (const auto& e : m) {
    require(by_id.emplace(e.utterance_id, &e).second,
            "manifest: duplicate utterance_id " + e.utterance_id);
  }
  for (const auto& e : m) {
    const bool has_noise = e.noise_type.has_value() && e.snr_db.has_value();
    require(e.is_noisy() == has_noise,
            "manifest: " + e.utterance_id + ": noisy entries need noise_type and snr_db");
    require(e.is_noisy() || (!e.noise_type && !e.snr_db),
            "manifest: " + e.utterance_id + ": clean entry carries noise fields");
    auto it = by_id.find(e.clean_pair_id);
    require(it != by_id.end(), "manifest: unresolved clean_pair_id " + e.clean_pair_id);
    require(it->second->domain == Domain::kClean,
            "manifest: clean_pair_id of " + e.utterance_id + " is not clean");
    if (!e.is_noisy()) require(e.clean_pair_id == e.utterance_id, "manifest: clean entry must pair with itself");
  }
}

inline std::string serialize_manifest(const Manifest& m) {
  std::string out;
  for (const auto& e : m) {
    out += to_json(e).dump();
    out += '\n';
  }
  return out;
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << serialize_manifest(m);
  if (!out) throw IoError("write failed: " + path.string());
}

inline Manifest parse_manifest(std::istream& in) {
  Manifest m;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& ex) {
      throw InvalidArgument("manifest line " + std::to_string(lineno) + ": " + ex.what());
    }
    m.push_back(entry_from_json(j));
  }
  validate_manifest(m);
  return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  return parse_manifest(in);
}

struct ManifestOptions {
  std::filesystem::path clean_dir;
  std::filesystem::path noise_dir;
  double snr_min = 5.0;
  double snr_max = 20.0;
  /// Leading fraction of each noise clip reserved for training mixtures; the
  /// remainder is the test region.
  double noise_train_fraction = 0.75;
  NoiseRegion region = NoiseRegion::kTrain;
  /// Noisy copies per clean utterance, each with a distinct noise type.
  int augmentations = 1;
  uint64_t seed = 0;
};

/// Loads a waveform and resamples it to 16 kHz when needed.
inline Waveform load_canonical(const std::filesystem::path& path) {
  Waveform w = load_waveform(path);
  if (w.sample_rate != kCanonicalSampleRate) w = resample(w, kCanonicalSampleRate);
  return w;
}

/// Sample range [begin, end) of a noise clip that belongs to `region`.
inline std::pair<size_t, size_t> noise_region_bounds(size_t clip_len, double train_fraction,
                                                     NoiseRegion region) {
  require(train_fraction > 0.0 && train_fraction < 1.0,
          "noise train fraction must lie strictly between 0 and 1");
  const auto split = static_cast<size_t>(std::floor(clip_len * train_fraction));
  auto bounds = region == NoiseRegion::kTrain ? std::pair<size_t, size_t>{0, split}
                                              : std::pair<size_t, size_t>{split, clip_len};
  require(bounds.second > bounds.first, "noise clip too short to split");
  return bounds;
}

namespace manifest_detail {

inline std::vector<std::filesystem::path> list_wavs(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  for (const auto& it : std::filesystem::recursive_directory_iterator(dir)) {
    if (!it.is_regular_file()) continue;
    auto ext = it.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".wav") files.push_back(it.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

inline std::string speaker_of(const std::filesystem::path& file,
                              const std::filesystem::path& root) {
  const auto rel = file.lexically_relative(root);
  if (std::distance(rel.begin(), rel.end()) > 1) return rel.begin()->string();
  const auto stem = file.stem().string();
  const auto cut = stem.find('_');
  return cut == std::string::npos ? stem : stem.substr(0, cut);
}

}  // namespace manifest_detail

/// Enumerates clean utterances (sorted by path) and attaches, per utterance,
/// `augmentations` noisy entries with distinct noise types, SNR uniform in
/// [snr_min, snr_max] and a random crop offset inside the chosen region.
/// Deterministic in `seed`.
inline Manifest build_manifest(const ManifestOptions& opt) {
  namespace fs = std::filesystem;
  require(opt.snr_min <= opt.snr_max, "snr range: min must not exceed max");
  require(opt.augmentations >= 0, "augmentations must be non-negative");
  const auto clean_files = manifest_detail::list_wavs(opt.clean_dir);
  if (clean_files.empty()) throw InvalidArgument("empty clean corpus: " + opt.clean_dir.string());
  const auto noise_files = manifest_detail::list_wavs(opt.noise_dir);
  if (noise_files.empty()) throw InvalidArgument("empty noise set: " + opt.noise_dir.string());
  require(static_cast<size_t>(opt.augmentations) <= noise_files.size(),
          "augmentations exceed the number of noise types");

  std::vector<size_t> region_len;
  std::vector<std::string> noise_types;
  for (const auto& f : noise_files) {
    const Waveform n = load_canonical(f);
    const auto [b, e] = noise_region_bounds(n.size(), opt.noise_train_fraction, opt.region);
    std::vector<double> seg(n.samples.begin() + static_cast<long>(b),
                            n.samples.begin() + static_cast<long>(e));
    require(signal_power(seg) > 0.0, "noise file has zero power: " + f.string());
    region_len.push_back(e - b);
    noise_types.push_back(f.stem().string());
  }

  Rng rng(derive_seed(opt.seed, {0x6d616e69ULL}));
  Manifest out;
  for (const auto& f : clean_files) {
    const Waveform clean = load_canonical(f);
    require(signal_power(clean.samples) > 0.0, "clean utterance has zero power: " + f.string());
    ManifestEntry c;
    auto rel = f.lexically_relative(opt.clean_dir);
    rel.replace_extension();
    c.utterance_id = rel.generic_string();
    c.audio_path = f.generic_string();
    c.speaker_id = manifest_detail::speaker_of(f, opt.clean_dir);
    c.domain = Domain::kClean;
    c.clean_pair_id = c.utterance_id;
    out.push_back(c);

    std::vector<size_t> order(noise_files.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
    for (int a = 0; a < opt.augmentations; ++a) {
      const size_t k = order[static_cast<size_t>(a)];
      ManifestEntry n = c;
      n.domain = Domain::kNoisy;
      n.noise_type = noise_types[k];
      n.utterance_id = c.utterance_id + "+" + noise_types[k];
      n.snr_db = rng.uniform(opt.snr_min, opt.snr_max);
      n.noise_path = noise_files[k].generic_string();
      n.noise_region = opt.region;
      n.noise_offset = random_noise_offset(region_len[k], clean.size(), rng);
      n.clean_pair_id = c.utterance_id;
      out.push_back(n);
    }
  }
  validate_manifest(out);
  return out;
}

/// Thread-safe cache of decoded 16 kHz audio keyed by path.
class AudioStore {
 public:
  explicit AudioStore(double noise_train_fraction = 0.75)
      : train_fraction_(noise_train_fraction) {}

  std::shared_ptr<const Waveform> get(const std::string& path) {
    std::lock_guard lock(mu_);
    auto it = cache_.find(path);
    if (it != cache_.end()) return it->second;
    auto w = std::make_shared<const Waveform>(load_canonical(path));
    cache_.emplace(path, w);
    return w;
  }

  /// Renders the audio an entry stands for. For noisy entries this rebuilds
  /// the mixture from the recipe; `mix` receives gain and noise segment.
  Waveform render(const ManifestEntry& e, MixResult* mix = nullptr) {
    auto clean = get(e.audio_path);
    if (!e.is_noisy()) return *clean;
    require(e.snr_db.has_value(), "noisy entry without snr_db: " + e.utterance_id);
    auto noise = get(e.noise_path);
    const auto [b, end] = noise_region_bounds(noise->size(), train_fraction_, e.noise_region);
    std::span<const double> region(noise->samples.data() + b, end - b);
    const auto seg = align_noise(region, clean->size(), e.noise_offset);
    MixResult r = mix_at_snr(*clean, seg, *e.snr_db);
    Waveform out = r.mixture;
    if (mix) *mix = std::move(r);
    return out;
  }

 private:
  double train_fraction_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const Waveform>> cache_;
};

}  // namespace nrvc
