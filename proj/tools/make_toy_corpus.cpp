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

// Writes the synthetic two-speaker corpus and two noise clips.

#include <iostream>

#include <CLI11.hpp>

#include "nrvc/toy_corpus.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic corpus for nrvc smoke runs"};
  std::string out;
  nrvc::toy::CorpusOptions opts;
  app.add_option("--out-dir", out, "Output root (clean/ and noise/ are created)")->required();
  app.add_option("--utterances", opts.utterances_per_speaker, "Utterances per speaker")->capture_default_str();
  app.add_option("--seed", opts.seed, "Random seed")->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }
  try {
    const auto layout = nrvc::toy::write_corpus(out, opts);
    std::cout << "toy_corpus utterances=" << layout.num_utterances << " noise_types=" << layout.num_noise_types
              << " clean_dir=" << layout.clean_dir.generic_string()
              << " noise_dir=" << layout.noise_dir.generic_string() << '\n';
  } catch (const nrvc::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
