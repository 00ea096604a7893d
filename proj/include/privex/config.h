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

#ifndef PRIVEX_CONFIG_H_
#define PRIVEX_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "privex/classifier.h"
#include "privex/dataset.h"
#include "privex/pprlvgan.h"

namespace privex {

// Everything one invocation needs. Text form:
//
//   # comment
//   [section]
//   key = value
//
// Sections and keys (defaults in parentheses):
//   [run]        seed (42), output_dir (privex_out)
//   [data]       manifest (unset: synthesize)
//   [synth]      n_identities (24), images_per_identity (20), resolution (64),
//                pathology_fraction (0.5), noise_std (0.03),
//                lesion_region (0.14,0.28,0.40,0.72 as top,left,bottom,right)
//   [preprocess] crop (unset, or row,col,height,width), flip_right_eye (true),
//                center_iris (true), target_resolution (64)
//   [split]      train (0.65), val (0.15), test (0.20)
//   [blur]       kernel_sizes (3,9,15,21), sigma (auto)
//   [ksame]      k_values (3,6,9,12)
//   [pprlvgan]   lambda_g1..lambda_g4 (0.5,0.5,0.5,0.002), lambda_d1..lambda_d3
//                (1), latent_dim (32), batch_size (16), epochs (40),
//                learning_rate (0.0002), beta1 (0.5), beta2 (0.999),
//                non_saturating (false), averaging_n (6)
//   [classifier] epochs (20), batch_size (16), learning_rate (0.001)
//   [saliency]   count (8)
//
// Unknown sections or keys raise ConfigError naming the offender. Setting
// [data] manifest together with any [synth] key is also a ConfigError.
struct RunConfig {
  uint64_t seed = 42;
  std::filesystem::path output_dir = "privex_out";

  std::optional<std::filesystem::path> manifest;
  SynthSpec synth;
  PreprocessOptions preprocess;
  SplitRatios split;

  std::vector<int> blur_kernel_sizes{3, 9, 15, 21};
  std::optional<double> blur_sigma;  // nullopt = auto
  std::vector<int> ksame_k_values{3, 6, 9, 12};

  TrainingHyperparams gan;
  int averaging_n = 6;

  ClassifierHyperparams classifier;
  int saliency_count = 8;

  RunConfig();

  void Validate() const;

  // Stage fingerprints; each covers the settings its artifacts depend on.
  std::string DataHash() const;
  std::string GanHash() const;
  std::string ClassifierHash() const;
  std::string PrivatizeHash() const;
  std::string EvaluateHash() const;
};

RunConfig ParseConfig(const std::string& text);
RunConfig LoadConfig(const std::filesystem::path& path);

// Applies PRIVEX_OUTPUT_DIR and PRIVEX_SEED when set. A malformed seed raises
// ConfigError.
void ApplyEnvironment(RunConfig& config);

// Canonical key=value listing of every resolved setting.
std::string CanonicalConfig(const RunConfig& config);

// 16 hex digits of the 64-bit FNV-1a hash of `text`.
std::string HashText(const std::string& text);

}  // namespace privex

#endif  // PRIVEX_CONFIG_H_
