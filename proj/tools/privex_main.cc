//
// Copyright 2026 The Privex Authors
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
//

// Command-line front end: privex <command> [--config FILE] [options].

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "privex/config.h"
#include "privex/error.h"
#include "privex/pipeline.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;
constexpr int kExitNumerical = 4;

constexpr const char* kFooter = R"(Commands:
  synth             write the synthetic dataset
  ingest            preprocess and split the dataset source
  train-gan         train the identity-replacement generator
  train-classifier  train the identity and pathology evaluation classifiers
  privatize         write blurred, K-Same and generated test sets
  evaluate          score every privatized set
  saliency          write relevance maps for test images
  report            write the report CSV (header only without evaluation rows)
  pipeline          run every stage in order

Environment:
  PRIVEX_OUTPUT_DIR  overrides [run] output_dir
  PRIVEX_SEED        overrides [run] seed
Command-line flags take precedence over the environment.

Exit status: 0 success, 2 configuration or input error, 3 missing artifact,
4 numerical failure, 1 other I/O failure.)";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privatize case-based explanation images and evaluate them."};
  app.footer(kFooter);
  std::string command;
  std::string config_path;
  std::string output_dir;
  std::optional<uint64_t> seed;
  bool print_config = false;
  app.add_option("command", command, "Command to run")->required();
  app.add_option("-c,--config", config_path, "Configuration file");
  app.add_option("-o,--output-dir", output_dir, "Artifact directory");
  app.add_option("-s,--seed", seed, "Global seed");
  app.add_flag("--print-config", print_config, "Print the resolved configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const privex::Command cmd = privex::ParseCommand(command);
    privex::RunConfig config =
        config_path.empty() ? privex::RunConfig() : privex::LoadConfig(config_path);
    privex::ApplyEnvironment(config);
    if (!output_dir.empty()) config.output_dir = output_dir;
    if (seed) config.seed = *seed;
    config.Validate();
    if (print_config) std::cout << privex::CanonicalConfig(config);
    const auto produced = privex::RunCommand(cmd, config, std::cerr);
    for (const auto& path : produced) std::cout << path.string() << "\n";
    return 0;
  } catch (const privex::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const privex::MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissing;
  } catch (const privex::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const privex::LoadError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    // Settings that are well-formed but unusable for this data.
    std::cerr << "invalid setting: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
