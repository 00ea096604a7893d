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

#include "privex/dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "privex/error.h"
#include "privex/rng.h"

namespace privex {

std::string EyeSideName(EyeSide side) {
  switch (side) {
    case EyeSide::kLeft:
      return "left";
    case EyeSide::kRight:
      return "right";
    case EyeSide::kUnknown:
      return "unknown";
  }
  return "unknown";
}

EyeSide ParseEyeSide(const std::string& text) {
  if (text == "left" || text == "L" || text == "l") return EyeSide::kLeft;
  if (text == "right" || text == "R" || text == "r") return EyeSide::kRight;
  if (text.empty() || text == "unknown") return EyeSide::kUnknown;
  throw std::invalid_argument("unknown eye_side '" + text + "'");
}

Dataset::Dataset(std::vector<ImageSample> samples)
    : samples_(std::move(samples)) {
  std::set<int> ids;
  for (size_t i = 0; i < samples_.size(); ++i) {
    const ImageSample& s = samples_[i];
    if (!index_.emplace(s.id, i).second) {
      throw std::invalid_argument("duplicate sample id '" + s.id + "'");
    }
    if (s.identity < 0) {
      throw std::invalid_argument("negative identity for sample '" + s.id +
                                  "'");
    }
    if (s.pathology != 0 && s.pathology != 1) {
      throw std::invalid_argument("pathology label must be 0 or 1 for '" +
                                  s.id + "'");
    }
    for (float v : s.pixels.pixels()) {
      if (!(v >= 0.0f && v <= 1.0f)) {
        throw std::invalid_argument("pixel outside [0,1] in sample '" + s.id +
                                    "'");
      }
    }
    ids.insert(s.identity);
    ++class_counts_[s.pathology];
  }
  identities_.assign(ids.begin(), ids.end());
}

const ImageSample* Dataset::Find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &samples_[it->second];
}

bool RelativeRect::Contains(int r, int c, int rows, int cols) const {
  const double y = (r + 0.5) / rows;
  const double x = (c + 0.5) / cols;
  return y >= top && y < bottom && x >= left && x < right;
}

// ---------------------------------------------------------------------------
// Preprocessing

PixelPoint EstimateIrisCenter(const Image& image) {
  double total = 0.0, sr = 0.0, sc = 0.0;
  for (int r = 0; r < image.rows(); ++r) {
    for (int c = 0; c < image.cols(); ++c) {
      const double w = 1.0 - image.at(r, c);
      total += w;
      sr += w * r;
      sc += w * c;
    }
  }
  if (total <= 0.0) {
    return {(image.rows() - 1) / 2.0, (image.cols() - 1) / 2.0};
  }
  return {sr / total, sc / total};
}

Image ResizeBilinear(const Image& image, int rows, int cols) {
  if (rows <= 0 || cols <= 0) {
    throw std::invalid_argument("resize target must be positive");
  }
  if (image.rows() == rows && image.cols() == cols) return image;
  Image out(rows, cols);
  const double sy = static_cast<double>(image.rows()) / rows;
  const double sx = static_cast<double>(image.cols()) / cols;
  for (int r = 0; r < rows; ++r) {
    const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0,
                                static_cast<double>(image.rows() - 1));
    const int y0 = static_cast<int>(std::floor(y));
    const int y1 = std::min(y0 + 1, image.rows() - 1);
    const double fy = y - y0;
    for (int c = 0; c < cols; ++c) {
      const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0,
                                  static_cast<double>(image.cols() - 1));
      const int x0 = static_cast<int>(std::floor(x));
      const int x1 = std::min(x0 + 1, image.cols() - 1);
      const double fx = x - x0;
      const double top =
          image.at(y0, x0) * (1.0 - fx) + image.at(y0, x1) * fx;
      const double bottom =
          image.at(y1, x0) * (1.0 - fx) + image.at(y1, x1) * fx;
      out.at(r, c) = static_cast<float>(top * (1.0 - fy) + bottom * fy);
    }
  }
  return out;
}

namespace {

Image Crop(const Image& image, const Rect& rect) {
  if (rect.row < 0 || rect.col < 0 || rect.height <= 0 || rect.width <= 0 ||
      rect.row + rect.height > image.rows() ||
      rect.col + rect.width > image.cols()) {
    throw std::invalid_argument("crop_rect outside image bounds");
  }
  Image out(rect.height, rect.width);
  for (int r = 0; r < rect.height; ++r) {
    for (int c = 0; c < rect.width; ++c) {
      out.at(r, c) = image.at(rect.row + r, rect.col + c);
    }
  }
  return out;
}

// Integer translation by (dr, dc) with edge replication of revealed borders.
Image Translate(const Image& image, int dr, int dc) {
  if (dr == 0 && dc == 0) return image;
  Image out(image.rows(), image.cols());
  for (int r = 0; r < image.rows(); ++r) {
    const int sr = std::clamp(r - dr, 0, image.rows() - 1);
    for (int c = 0; c < image.cols(); ++c) {
      const int sc = std::clamp(c - dc, 0, image.cols() - 1);
      out.at(r, c) = image.at(sr, sc);
    }
  }
  return out;
}

}  // namespace

ImageSample Preprocess(const ImageSample& sample,
                       const PreprocessOptions& opts) {
  if (sample.pixels.empty()) {
    throw std::invalid_argument("preprocess: sample '" + sample.id +
                                "' has no pixels");
  }
  if (opts.target_resolution <= 0) {
    throw std::invalid_argument("target_resolution must be positive");
  }
  ImageSample out = sample;
  if (opts.crop_rect) {
    out.pixels = Crop(out.pixels, *opts.crop_rect);
    if (out.iris_center) {
      out.iris_center->row -= opts.crop_rect->row;
      out.iris_center->col -= opts.crop_rect->col;
    }
  }
  if (opts.flip_right_eye && out.eye_side == EyeSide::kRight) {
    out.pixels = FlipHorizontal(out.pixels);
    out.eye_side = EyeSide::kLeft;
    if (out.iris_center) {
      out.iris_center->col = out.pixels.cols() - 1 - out.iris_center->col;
    }
  }
  if (opts.center_iris) {
    const PixelPoint center =
        out.iris_center ? *out.iris_center : EstimateIrisCenter(out.pixels);
    const double target_r = (out.pixels.rows() - 1) / 2.0;
    const double target_c = (out.pixels.cols() - 1) / 2.0;
    const int dr = static_cast<int>(std::floor(target_r - center.row + 0.5));
    const int dc = static_cast<int>(std::floor(target_c - center.col + 0.5));
    out.pixels = Translate(out.pixels, dr, dc);
    out.iris_center = PixelPoint{center.row + dr, center.col + dc};
  }
  const int rows = out.pixels.rows();
  const int cols = out.pixels.cols();
  const int res = opts.target_resolution;
  if (rows != res || cols != res) {
    out.pixels = ResizeBilinear(out.pixels, res, res);
    if (out.iris_center) {
      out.iris_center->row =
          (out.iris_center->row + 0.5) * res / rows - 0.5;
      out.iris_center->col =
          (out.iris_center->col + 0.5) * res / cols - 0.5;
    }
  }
  out.pixels.Clamp01();
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

DatasetSplit Split(const Dataset& dataset, const SplitRatios& ratios,
                   uint64_t seed) {
  if (ratios.train <= 0 || ratios.val <= 0 || ratios.test <= 0) {
    throw std::invalid_argument("split ratios must be positive");
  }
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
  // Stratification groups keyed by (identity, pathology).
  std::map<std::pair<int, int>, std::vector<size_t>> groups;
  for (size_t i = 0; i < dataset.size(); ++i) {
    groups[{dataset[i].identity, dataset[i].pathology}].push_back(i);
  }
  struct Group {
    std::vector<size_t> members;
    int val = 0;
    int test = 0;
  };
  std::vector<Group> eligible;
  std::vector<size_t> train_only;
  for (auto& [key, members] : groups) {
    if (members.size() < 3) {
      train_only.insert(train_only.end(), members.begin(), members.end());
    } else {
      eligible.push_back({members, 0, 0});
    }
  }

  Rng rng(seed);
  for (Group& g : eligible) std::shuffle(g.members.begin(), g.members.end(), rng);

  // Largest-remainder apportionment of the global val/test targets across
  // groups. Group visiting order is shuffled so leftover units do not always
  // land on the lowest identities.
  std::vector<size_t> order(eligible.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  auto apportion = [&](double ratio, auto add_unit) {
    double total_quota = 0.0;
    for (const Group& g : eligible) total_quota += g.members.size() * ratio;
    int target = static_cast<int>(std::lround(total_quota));
    std::vector<std::pair<double, size_t>> remainders;
    for (size_t pos = 0; pos < order.size(); ++pos) {
      Group& g = eligible[order[pos]];
      const double q = g.members.size() * ratio;
      const int base = static_cast<int>(std::floor(q));
      for (int u = 0; u < base && target > 0; ++u) {
        if (!add_unit(g)) break;
        --target;
      }
      remainders.emplace_back(q - base, pos);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& entry : remainders) {
      if (target <= 0) break;
      const size_t pos = entry.second;
      if (add_unit(eligible[order[pos]])) --target;
    }
  };
  auto room = [](const Group& g) {
    return static_cast<int>(g.members.size()) - g.val - g.test > 1;
  };
  apportion(ratios.val,
            [&](Group& g) { return room(g) ? (++g.val, true) : false; });
  apportion(ratios.test,
            [&](Group& g) { return room(g) ? (++g.test, true) : false; });

  std::vector<int> assignment(dataset.size(), 0);  // 0 train, 1 val, 2 test
  for (const Group& g : eligible) {
    for (int i = 0; i < g.val; ++i) assignment[g.members[i]] = 1;
    for (int i = 0; i < g.test; ++i) assignment[g.members[g.val + i]] = 2;
  }
  std::vector<ImageSample> parts[3];
  for (size_t i = 0; i < dataset.size(); ++i) {
    parts[assignment[i]].push_back(dataset[i]);
  }
  return {Dataset(std::move(parts[0])), Dataset(std::move(parts[1])),
          Dataset(std::move(parts[2]))};
}

// ---------------------------------------------------------------------------
// Synthesis

void SynthSpec::Validate() const {
  if (n_identities < 2) throw std::invalid_argument("n_identities must be >= 2");
  if (images_per_identity < 1) {
    throw std::invalid_argument("images_per_identity must be >= 1");
  }
  if (resolution < 8) throw std::invalid_argument("resolution must be >= 8");
  if (pathology_fraction < 0.0 || pathology_fraction > 1.0) {
    throw std::invalid_argument("pathology_fraction must be in [0,1]");
  }
  if (noise_std < 0.0) throw std::invalid_argument("noise_std must be >= 0");
  if (!(lesion_region.top < lesion_region.bottom &&
        lesion_region.left < lesion_region.right)) {
    throw std::invalid_argument("lesion_region is empty");
  }
}

namespace {

struct IdentityLook {
  double iris_radius;   // relative to resolution
  double pupil_radius;  // relative to resolution
  double iris_level;
  double sclera_level;
  int freq[2];
  double amp[2];
  double phase[2];
  double ring_freq;
  double ring_amp;
  double ring_phase;
};

IdentityLook DrawLook(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> freq(2, 7);
  IdentityLook look{};
  look.iris_radius = 0.27 + 0.07 * u(rng);
  look.pupil_radius = 0.08 + 0.05 * u(rng);
  look.iris_level = 0.22 + 0.22 * u(rng);
  look.sclera_level = 0.60 + 0.22 * u(rng);
  for (int k = 0; k < 2; ++k) {
    look.freq[k] = freq(rng);
    look.amp[k] = 0.05 + 0.07 * u(rng);
    look.phase[k] = 2.0 * std::numbers::pi * u(rng);
  }
  look.ring_freq = 1.5 + 2.5 * u(rng);
  look.ring_amp = 0.03 + 0.05 * u(rng);
  look.ring_phase = 2.0 * std::numbers::pi * u(rng);
  return look;
}

// Logistic step centered at 0, roughly one pixel wide.
double Smooth(double x) { return 1.0 / (1.0 + std::exp(-2.0 * x)); }

}  // namespace

Dataset Synthesize(const SynthSpec& spec, uint64_t seed) {
  spec.Validate();
  const int res = spec.resolution;
  std::vector<IdentityLook> looks;
  for (int id = 0; id < spec.n_identities; ++id) {
    Rng rng(DeriveSeed(seed, 1, id));
    looks.push_back(DrawLook(rng));
  }
  std::vector<int> order(spec.n_identities);
  std::iota(order.begin(), order.end(), 0);
  {
    Rng rng(DeriveSeed(seed, 0));
    std::shuffle(order.begin(), order.end(), rng);
  }
  const int n_positive =
      static_cast<int>(std::lround(spec.pathology_fraction * spec.n_identities));
  std::vector<int> pathology(spec.n_identities, 0);
  for (int i = 0; i < n_positive; ++i) pathology[order[i]] = 1;

  std::vector<ImageSample> samples;
  samples.reserve(static_cast<size_t>(spec.n_identities) *
                  spec.images_per_identity);
  const double mid = (res - 1) / 2.0;
  for (int id = 0; id < spec.n_identities; ++id) {
    const IdentityLook& look = looks[id];
    for (int k = 0; k < spec.images_per_identity; ++k) {
      Rng rng(DeriveSeed(seed, 2, static_cast<uint64_t>(id) * 100003 + k));
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      const double rot = 0.12 * gauss(rng);
      const double cy = mid + u(rng);
      const double cx = mid + u(rng);
      const double gain = 0.02 * gauss(rng);
      const double iris_r = look.iris_radius * res;
      const double pupil_r = look.pupil_radius * res;
      Image img(res, res);
      for (int r = 0; r < res; ++r) {
        for (int c = 0; c < res; ++c) {
          const double y = r - cy;
          const double x = c - cx;
          const double rho = std::hypot(y, x);
          const double theta = std::atan2(y, x) + rot;
          const double t =
              std::clamp((rho - pupil_r) / (iris_r - pupil_r), 0.0, 1.0);
          double iris = look.iris_level +
                        look.ring_amp *
                            std::cos(2.0 * std::numbers::pi * look.ring_freq * t +
                                     look.ring_phase);
          for (int h = 0; h < 2; ++h) {
            iris += look.amp[h] * std::cos(look.freq[h] * theta + look.phase[h]);
          }
          const double in_iris = Smooth(iris_r - rho);
          const double in_pupil = Smooth(pupil_r - rho);
          double v = look.sclera_level * (1.0 - in_iris) +
                     (iris * (1.0 - in_pupil) + 0.06 * in_pupil) * in_iris;
          if (pathology[id] == 1 &&
              spec.lesion_region.Contains(r, c, res, res)) {
            // Arc in the upper iris band, within 55 degrees of vertical.
            const double up_angle = std::atan2(std::abs(x), -y);
            const double band = Smooth(rho - 0.68 * iris_r) *
                                Smooth(0.96 * iris_r - rho);
            if (-y > 0 && up_angle < 55.0 * std::numbers::pi / 180.0) {
              v += 0.45 * band;
            }
          }
          v += gain + spec.noise_std * gauss(rng);
          img.at(r, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
      ImageSample s;
      char name[32];
      std::snprintf(name, sizeof(name), "syn%03d_%03d", id, k);
      s.id = name;
      s.pixels = std::move(img);
      s.identity = id;
      s.pathology = pathology[id];
      s.eye_side = EyeSide::kLeft;
      s.iris_center = PixelPoint{cy, cx};
      samples.push_back(std::move(s));
    }
  }
  return Dataset(std::move(samples));
}

// ---------------------------------------------------------------------------
// Manifest IO

namespace {

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string StripCr(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.pop_back();
  return s;
}

int ParseInt(const std::string& text, const std::string& what) {
  size_t pos = 0;
  int value = 0;
  try {
    value = std::stoi(text, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad " + what + " '" + text + "'");
  }
  if (pos != text.size()) {
    throw std::invalid_argument("bad " + what + " '" + text + "'");
  }
  return value;
}

double ParseDouble(const std::string& text, const std::string& what) {
  size_t pos = 0;
  double value = 0;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad " + what + " '" + text + "'");
  }
  if (pos != text.size()) {
    throw std::invalid_argument("bad " + what + " '" + text + "'");
  }
  return value;
}

constexpr char kManifestHeader[] =
    "id,path,identity,pathology,eye_side,iris_row,iris_col";

}  // namespace

Dataset LoadManifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw LoadError("manifest " + path.string() + " has no header");
  }
  const auto header = SplitCsvLine(StripCr(line));
  const std::vector<std::string> required = {"id", "path", "identity",
                                             "pathology", "eye_side"};
  std::map<std::string, size_t> column;
  for (size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  for (const auto& name : required) {
    if (!column.count(name)) {
      throw LoadError("manifest " + path.string() + " lacks column '" + name +
                      "'");
    }
  }
  const auto base = path.parent_path();
  std::vector<ImageSample> samples;
  std::set<std::string> seen;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = StripCr(line);
    if (line.empty()) continue;
    const std::string where =
        path.string() + " row " + std::to_string(row) + ": ";
    const auto fields = SplitCsvLine(line);
    if (fields.size() < required.size() || fields.size() > header.size()) {
      throw LoadError(where + "expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(fields.size()));
    }
    auto get = [&](const std::string& name) -> std::string {
      auto it = column.find(name);
      if (it == column.end() || it->second >= fields.size()) return {};
      return fields[it->second];
    };
    try {
      ImageSample s;
      s.id = get("id");
      if (s.id.empty()) throw std::invalid_argument("empty id");
      if (!seen.insert(s.id).second) {
        throw std::invalid_argument("duplicate sample id '" + s.id + "'");
      }
      s.identity = ParseInt(get("identity"), "identity");
      s.pathology = ParseInt(get("pathology"), "pathology");
      s.eye_side = ParseEyeSide(get("eye_side"));
      const std::string ir = get("iris_row");
      const std::string ic = get("iris_col");
      if (!ir.empty() && !ic.empty()) {
        s.iris_center =
            PixelPoint{ParseDouble(ir, "iris_row"), ParseDouble(ic, "iris_col")};
      }
      std::filesystem::path image_path = get("path");
      if (image_path.is_relative()) image_path = base / image_path;
      s.pixels = ReadImage(image_path);
      samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw LoadError(where + e.what());
    }
  }
  try {
    return Dataset(std::move(samples));
  } catch (const std::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

void WriteManifestOnly(const Dataset& dataset,
                       const std::filesystem::path& manifest_path) {
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot write " + manifest_path.string());
  out << kManifestHeader << "\n";
  char buf[64];
  for (const ImageSample& s : dataset.samples()) {
    out << s.id << ",images/" << s.id << ".pgm," << s.identity << ","
        << s.pathology << "," << EyeSideName(s.eye_side) << ",";
    if (s.iris_center) {
      std::snprintf(buf, sizeof(buf), "%.4f,%.4f", s.iris_center->row,
                    s.iris_center->col);
      out << buf;
    } else {
      out << ",";
    }
    out << "\n";
  }
}

void WriteManifest(const Dataset& dataset, const std::filesystem::path& dir,
                   const std::string& manifest_name) {
  std::filesystem::create_directories(dir / "images");
  for (const ImageSample& s : dataset.samples()) {
    WritePgm(dir / "images" / (s.id + ".pgm"), s.pixels);
  }
  WriteManifestOnly(dataset, dir / manifest_name);
}

}  // namespace privex
