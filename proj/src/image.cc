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

#include "privex/image.h"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>

#include "privex/error.h"

namespace privex {

Image::Image(int rows, int cols, float fill)
    : rows_(rows),
      cols_(cols),
      pixels_(static_cast<size_t>(rows) * cols, fill) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("negative image size");
}

Image::Image(int rows, int cols, std::vector<float> pixels)
    : rows_(rows), cols_(cols), pixels_(std::move(pixels)) {
  if (rows < 0 || cols < 0 ||
      pixels_.size() != static_cast<size_t>(rows) * cols) {
    throw std::invalid_argument("pixel count does not match image size");
  }
}

void Image::Clamp01() {
  for (float& v : pixels_) v = std::clamp(v, 0.0f, 1.0f);
}

double SquaredDistance(const Image& a, const Image& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("SquaredDistance: image sizes differ");
  }
  double sum = 0.0;
  auto pa = a.pixels();
  auto pb = b.pixels();
  for (size_t i = 0; i < pa.size(); ++i) {
    const double d = static_cast<double>(pa[i]) - pb[i];
    sum += d * d;
  }
  return sum;
}

Image MeanImage(std::span<const Image* const> images) {
  if (images.empty()) throw std::invalid_argument("MeanImage: no images");
  const int rows = images.front()->rows();
  const int cols = images.front()->cols();
  std::vector<double> acc(static_cast<size_t>(rows) * cols, 0.0);
  for (const Image* img : images) {
    if (img->rows() != rows || img->cols() != cols) {
      throw std::invalid_argument("MeanImage: image sizes differ");
    }
    auto px = img->pixels();
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += px[i];
  }
  std::vector<float> out(acc.size());
  const double n = static_cast<double>(images.size());
  for (size_t i = 0; i < acc.size(); ++i) {
    out[i] = static_cast<float>(acc[i] / n);
  }
  return Image(rows, cols, std::move(out));
}

Image FlipHorizontal(const Image& image) {
  Image out(image.rows(), image.cols());
  for (int r = 0; r < image.rows(); ++r) {
    for (int c = 0; c < image.cols(); ++c) {
      out.at(r, image.cols() - 1 - c) = image.at(r, c);
    }
  }
  return out;
}

namespace {

// Skips whitespace and '#' comments in a PNM header.
void SkipPnmSpace(std::istream& in) {
  while (in) {
    int ch = in.peek();
    if (ch == '#') {
      std::string discard;
      std::getline(in, discard);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
}

Image ReadPgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open image " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw LoadError("not a binary PGM (P5): " + path.string());
  int width = 0, height = 0, maxval = 0;
  SkipPnmSpace(in);
  in >> width;
  SkipPnmSpace(in);
  in >> height;
  SkipPnmSpace(in);
  in >> maxval;
  in.get();  // single whitespace before raster
  if (!in || width <= 0 || height <= 0 || maxval != 255) {
    throw LoadError("unsupported PGM header in " + path.string());
  }
  std::vector<unsigned char> raw(static_cast<size_t>(width) * height);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw LoadError("truncated PGM raster in " + path.string());
  }
  std::vector<float> px(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) px[i] = raw[i] / 255.0f;
  return Image(height, width, std::move(px));
}

Image ReadPng(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw LoadError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<unsigned char> raw(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
    png_image_free(&image);
    throw LoadError("cannot decode PNG " + path.string() + ": " +
                    image.message);
  }
  const int width = static_cast<int>(image.width);
  const int height = static_cast<int>(image.height);
  std::vector<float> px(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) px[i] = raw[i] / 255.0f;
  return Image(height, width, std::move(px));
}

}  // namespace

Image ReadImage(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw LoadError("image file does not exist: " + path.string());
  }
  std::ifstream probe(path, std::ios::binary);
  char sig[2] = {0, 0};
  probe.read(sig, 2);
  if (sig[0] == 'P' && sig[1] == '5') return ReadPgm(path);
  if (static_cast<unsigned char>(sig[0]) == 0x89 && sig[1] == 'P') {
    return ReadPng(path);
  }
  throw LoadError("unrecognized image format: " + path.string());
}

void WritePgm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << image.cols() << " " << image.rows() << "\n255\n";
  std::vector<unsigned char> raw(image.size());
  auto px = image.pixels();
  for (size_t i = 0; i < raw.size(); ++i) {
    const float v = std::clamp(px[i], 0.0f, 1.0f);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
}

}  // namespace privex
