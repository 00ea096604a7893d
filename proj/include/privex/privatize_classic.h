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

#ifndef PRIVEX_PRIVATIZE_CLASSIC_H_
#define PRIVEX_PRIVATIZE_CLASSIC_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "privex/dataset.h"
#include "privex/image.h"

namespace privex {

enum class PrivatizationMethod { kBlur, kKSame, kPprlVgan, kPprlVganAvg };

std::string MethodName(PrivatizationMethod method);
PrivatizationMethod ParseMethod(const std::string& text);

// Output pixels plus the provenance needed for leakage and anonymity checks.
struct PrivatizedImage {
  Image pixels;
  PrivatizationMethod method = PrivatizationMethod::kBlur;
  std::string params;  // e.g. "kernel=9" or "k=6"
  std::vector<std::string> source_ids;
  std::vector<int> source_identities;  // distinct, ascending
  std::optional<int> replacement_identity;
  std::string original_sample_id;
  std::optional<int> original_identity;
  std::optional<int> original_pathology;
  uint64_t seed = 0;
};

struct BlurConfig {
  int kernel_size = 3;
  // nullopt selects 0.3 * ((kernel_size - 1) * 0.5 - 1) + 0.8.
  std::optional<double> sigma;

  double ResolvedSigma() const;
};

// Normalized 2D Gaussian sampled at integer offsets, row-major size x size.
// Throws std::invalid_argument for even or non-positive sizes or sigma <= 0.
std::vector<double> GaussianKernel(int size, double sigma);

// Convolution with edge-replicate padding.
Image GaussianBlur(const Image& image, const BlurConfig& config);
PrivatizedImage Blur(const ImageSample& sample, const BlurConfig& config);

struct KSameConfig {
  int k = 3;
};

// K-Same-Select: per pathology class, greedy nearest-neighbour clusters of k
// identities (leftovers merge into the last cluster); every sample is replaced
// by the mean of one representative image per cluster identity. Output order
// follows the input. Throws std::invalid_argument naming a class with fewer
// than k identities.
std::vector<PrivatizedImage> KSameSelect(const Dataset& dataset,
                                         const KSameConfig& config,
                                         uint64_t seed);

struct AnonymityReport {
  bool pass = true;
  std::vector<std::string> violating_ids;  // original_sample_id of failures
};

// Passes iff every output has at least k distinct source identities and, for
// k-same outputs, the original identity is among them. Throws
// std::invalid_argument when provenance is missing.
AnonymityReport VerifyKAnonymity(const std::vector<PrivatizedImage>& outputs,
                                 int k);

// Privatized set manifest:
// id,path,method,params,original_id,replacement_identity,source_ids
// Images go to dir/images/<id>.pgm.
void WritePrivatizedSet(const std::vector<PrivatizedImage>& images,
                        const std::filesystem::path& dir);

// Reads a set written by WritePrivatizedSet. Identities of the original and
// source samples are resolved through `lookup`.
std::vector<PrivatizedImage> ReadPrivatizedSet(const std::filesystem::path& dir,
                                               const Dataset& lookup);

}  // namespace privex

#endif  // PRIVEX_PRIVATIZE_CLASSIC_H_
