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

#ifndef PRIVEX_DATASET_H_
#define PRIVEX_DATASET_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "privex/image.h"

namespace privex {

enum class EyeSide { kLeft, kRight, kUnknown };

std::string EyeSideName(EyeSide side);
EyeSide ParseEyeSide(const std::string& text);

struct PixelPoint {
  double row = 0.0;
  double col = 0.0;
  bool operator==(const PixelPoint&) const = default;
};

struct ImageSample {
  std::string id;
  Image pixels;
  int identity = 0;
  int pathology = 0;  // 1 = pathology present
  EyeSide eye_side = EyeSide::kUnknown;
  std::optional<PixelPoint> iris_center;
};

// Ordered, immutable collection of samples. Construction validates that ids
// are unique, labels are in range and pixels lie in [0, 1].
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<ImageSample> samples);

  const std::vector<ImageSample>& samples() const { return samples_; }
  size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const ImageSample& operator[](size_t i) const { return samples_[i]; }

  int n_identities() const { return static_cast<int>(identities_.size()); }
  // Distinct identity labels, ascending.
  const std::vector<int>& identities() const { return identities_; }
  // Sample count per pathology label (index 0 and 1).
  const std::array<int, 2>& class_counts() const { return class_counts_; }

  // Returns nullptr when the id is unknown.
  const ImageSample* Find(const std::string& id) const;

 private:
  std::vector<ImageSample> samples_;
  std::vector<int> identities_;
  std::array<int, 2> class_counts_{0, 0};
  std::map<std::string, size_t> index_;
};

struct Rect {
  int row = 0;
  int col = 0;
  int height = 0;
  int width = 0;
};

// Rectangle in relative [0, 1] coordinates.
struct RelativeRect {
  double top = 0.0;
  double left = 0.0;
  double bottom = 1.0;
  double right = 1.0;

  bool Contains(int r, int c, int rows, int cols) const;
};

struct PreprocessOptions {
  std::optional<Rect> crop_rect;
  bool flip_right_eye = true;
  bool center_iris = true;
  int target_resolution = 64;
};

// Crop, then mirror right eyes, then translate the iris to the image center,
// then bilinear-resize to target_resolution. Flipped samples are relabeled as
// left eyes; the iris center is tracked through every step.
ImageSample Preprocess(const ImageSample& sample, const PreprocessOptions& opts);

// Intensity-weighted centroid of the inverted image (dark iris dominates).
PixelPoint EstimateIrisCenter(const Image& image);

// Bilinear resize with half-pixel centers. Returns the input unchanged when
// the size already matches.
Image ResizeBilinear(const Image& image, int rows, int cols);

struct SplitRatios {
  double train = 0.65;
  double val = 0.15;
  double test = 0.20;
};

struct DatasetSplit {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Deterministic partition stratified by (identity, pathology). Every group of
// three or more images keeps at least one image in train, so identities seen
// in val/test are always present in train. Groups with fewer than three images
// go entirely to train. Sample order inside each part follows the input.
DatasetSplit Split(const Dataset& dataset, const SplitRatios& ratios,
                   uint64_t seed);

struct SynthSpec {
  int n_identities = 20;
  int images_per_identity = 20;
  int resolution = 64;
  double pathology_fraction = 0.3;
  double noise_std = 0.03;
  // Upper-iris band where the pathology arc is painted.
  RelativeRect lesion_region{0.14, 0.28, 0.40, 0.72};

  void Validate() const;
};

// Seeded synthetic iris images. Each identity has its own radial/angular
// texture signature; the pathology marker is a bright arc painted inside
// lesion_region on every image of a selected identity.
Dataset Synthesize(const SynthSpec& spec, uint64_t seed);

// Loads a manifest CSV (id,path,identity,pathology,eye_side,iris_row,iris_col).
// Relative image paths are resolved against the manifest's directory.
Dataset LoadManifest(const std::filesystem::path& path);

// Writes one PGM per sample under `dir` plus `dir/<manifest_name>`.
void WriteManifest(const Dataset& dataset, const std::filesystem::path& dir,
                   const std::string& manifest_name = "manifest.csv");

// Writes a manifest referencing images already written by WriteManifest.
void WriteManifestOnly(const Dataset& dataset,
                       const std::filesystem::path& manifest_path);

}  // namespace privex

#endif  // PRIVEX_DATASET_H_
