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

#ifndef PRIVEX_PIPELINE_H_
#define PRIVEX_PIPELINE_H_

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "privex/config.h"
#include "privex/report.h"

namespace privex {

enum class Command {
  kSynth,
  kIngest,
  kTrainGan,
  kTrainClassifier,
  kPrivatize,
  kEvaluate,
  kSaliency,
  kReport,
  kPipeline,
};

std::string CommandName(Command command);
// Throws ConfigError for an unknown name.
Command ParseCommand(const std::string& name);
const std::vector<Command>& AllCommands();

// Deterministic artifact locations under config.output_dir. Every name
// embeds the hash of the settings it depends on.
struct ArtifactPaths {
  std::filesystem::path dataset_dir;   // synthesized dataset
  std::filesystem::path split_dir;     // train.csv, val.csv, test.csv
  std::filesystem::path gan_prefix;    // .psck + .meta
  std::filesystem::path identity_classifier_prefix;
  std::filesystem::path pathology_classifier_prefix;
  std::filesystem::path privatized_dir;  // one subdirectory per set
  std::filesystem::path evaluation_csv;
  std::filesystem::path saliency_dir;
  std::filesystem::path report_csv;

  explicit ArtifactPaths(const RunConfig& config);
};

// Names of the privatized sets derived from the test split, in report order.
std::vector<std::string> PrivatizedSetNames(const RunConfig& config);

// Runs one command. Progress goes to `log`; produced files are returned.
// Missing upstream artifacts raise MissingArtifactError naming the file.
std::vector<std::filesystem::path> RunCommand(Command command,
                                              const RunConfig& config,
                                              std::ostream& log);

// Evaluation rows for the privatized sets on disk (baseline first).
std::vector<EvaluationRow> EvaluateArtifacts(const RunConfig& config,
                                             std::ostream& log);

}  // namespace privex

#endif  // PRIVEX_PIPELINE_H_
