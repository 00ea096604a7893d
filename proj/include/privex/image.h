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

#ifndef PRIVEX_IMAGE_H_
#define PRIVEX_IMAGE_H_

#include <filesystem>
#include <span>
#include <vector>

namespace privex {

// Single-channel intensity grid, row-major. Values are nominally in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int rows, int cols, float fill = 0.0f);
  Image(int rows, int cols, std::vector<float> pixels);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return pixels_.empty(); }
  size_t size() const { return pixels_.size(); }

  float& at(int r, int c) { return pixels_[static_cast<size_t>(r) * cols_ + c]; }
  float at(int r, int c) const {
    return pixels_[static_cast<size_t>(r) * cols_ + c];
  }

  std::span<float> pixels() { return pixels_; }
  std::span<const float> pixels() const { return pixels_; }

  // Clamps every pixel into [0, 1].
  void Clamp01();

  bool operator==(const Image& other) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<float> pixels_;
};

// Squared L2 distance between equally sized images.
double SquaredDistance(const Image& a, const Image& b);

// Pixelwise arithmetic mean of equally sized images. Requires a non-empty list.
Image MeanImage(std::span<const Image* const> images);

// Horizontal reflection: pixel (r, c) moves to (r, cols - 1 - c).
Image FlipHorizontal(const Image& image);

// Reads an 8-bit grayscale PGM (P5) or PNG; value v maps to v / 255.
// Throws LoadError on unreadable or unsupported files.
Image ReadImage(const std::filesystem::path& path);

// Writes an 8-bit binary PGM, quantizing round(clamp(v) * 255).
void WritePgm(const std::filesystem::path& path, const Image& image);

}  // namespace privex

#endif  // PRIVEX_IMAGE_H_
