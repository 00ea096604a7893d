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

#include "privex/privatize_classic.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "privex/error.h"
#include "privex/rng.h"

namespace privex {

std::string MethodName(PrivatizationMethod method) {
  switch (method) {
    case PrivatizationMethod::kBlur:
      return "blur";
    case PrivatizationMethod::kKSame:
      return "ksame";
    case PrivatizationMethod::kPprlVgan:
      return "pprlvgan";
    case PrivatizationMethod::kPprlVganAvg:
      return "pprlvgan_avg";
  }
  return "blur";
}

PrivatizationMethod ParseMethod(const std::string& text) {
  if (text == "blur") return PrivatizationMethod::kBlur;
  if (text == "ksame") return PrivatizationMethod::kKSame;
  if (text == "pprlvgan") return PrivatizationMethod::kPprlVgan;
  if (text == "pprlvgan_avg") return PrivatizationMethod::kPprlVganAvg;
  throw std::invalid_argument("unknown privatization method '" + text + "'");
}

// ---------------------------------------------------------------------------
// Blur

double BlurConfig::ResolvedSigma() const {
  if (sigma) return *sigma;
  return 0.3 * ((kernel_size - 1) * 0.5 - 1.0) + 0.8;
}

namespace {

std::vector<double> Gaussian1d(int size, double sigma) {
  if (size < 1 || size % 2 == 0) {
    throw std::invalid_argument("Gaussian kernel size must be odd and >= 1, got " +
                                std::to_string(size));
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("Gaussian sigma must be positive");
  const int half = size / 2;
  std::vector<double> g(size);
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double x = i - half;
    g[i] = std::exp(-x * x / (2.0 * sigma * sigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

}  // namespace

std::vector<double> GaussianKernel(int size, double sigma) {
  const auto g = Gaussian1d(size, sigma);
  std::vector<double> k(static_cast<size_t>(size) * size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) k[static_cast<size_t>(r) * size + c] = g[r] * g[c];
  }
  return k;
}

Image GaussianBlur(const Image& image, const BlurConfig& config) {
  const int size = config.kernel_size;
  if (size > 2 * image.rows() || size > 2 * image.cols()) {
    throw std::invalid_argument("blur kernel " + std::to_string(size) +
                                " exceeds twice the image dimension");
  }
  const auto g = Gaussian1d(size, config.ResolvedSigma());
  const int half = size / 2;
  const int rows = image.rows(), cols = image.cols();
  // Separable pass: rows then columns, each with edge replication.
  std::vector<double> tmp(static_cast<size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int t = -half; t <= half; ++t) {
        acc += g[t + half] * image.at(r, std::clamp(c + t, 0, cols - 1));
      }
      tmp[static_cast<size_t>(r) * cols + c] = acc;
    }
  }
  Image out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int t = -half; t <= half; ++t) {
        acc += g[t + half] * tmp[static_cast<size_t>(std::clamp(r + t, 0, rows - 1)) * cols + c];
      }
      out.at(r, c) = static_cast<float>(acc);
    }
  }
  out.Clamp01();
  return out;
}

PrivatizedImage Blur(const ImageSample& sample, const BlurConfig& config) {
  PrivatizedImage out;
  out.pixels = GaussianBlur(sample.pixels, config);
  out.method = PrivatizationMethod::kBlur;
  out.params = "kernel=" + std::to_string(config.kernel_size);
  out.source_ids = {sample.id};
  out.source_identities = {sample.identity};
  out.original_sample_id = sample.id;
  out.original_identity = sample.identity;
  out.original_pathology = sample.pathology;
  return out;
}

// ---------------------------------------------------------------------------
// K-Same-Select

std::vector<PrivatizedImage> KSameSelect(const Dataset& dataset,
                                         const KSameConfig& config,
                                         uint64_t seed) {
  if (config.k < 1) throw std::invalid_argument("k must be >= 1");
  std::vector<PrivatizedImage> outputs(dataset.size());
  for (int label = 0; label <= 1; ++label) {
    // Sample indices of this class, grouped by identity (ascending label).
    std::map<int, std::vector<size_t>> by_identity;
    for (size_t i = 0; i < dataset.size(); ++i) {
      if (dataset[i].pathology == label) by_identity[dataset[i].identity].push_back(i);
    }
    if (by_identity.empty()) continue;
    if (static_cast<int>(by_identity.size()) < config.k) {
      throw std::invalid_argument(
          "k-same-select: pathology class " + std::to_string(label) + " has " +
          std::to_string(by_identity.size()) + " identities, fewer than k=" +
          std::to_string(config.k));
    }

    Rng rng(DeriveSeed(seed, static_cast<uint64_t>(label)));
    std::set<int> unassigned;
    for (const auto& [id, members] : by_identity) unassigned.insert(id);
    std::vector<std::vector<int>> clusters;
    while (static_cast<int>(unassigned.size()) >= config.k) {
      // Seed image drawn uniformly among images of unassigned identities.
      std::vector<size_t> pool;
      for (int id : unassigned) {
        const auto& m = by_identity[id];
        pool.insert(pool.end(), m.begin(), m.end());
      }
      std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
      const size_t seed_index = pool[pick(rng)];
      const int seed_identity = dataset[seed_index].identity;
      const Image& seed_image = dataset[seed_index].pixels;

      std::vector<std::pair<double, int>> candidates;
      for (int id : unassigned) {
        if (id == seed_identity) continue;
        double best = std::numeric_limits<double>::infinity();
        for (size_t m : by_identity[id]) {
          best = std::min(best, SquaredDistance(seed_image, dataset[m].pixels));
        }
        candidates.emplace_back(best, id);
      }
      // Pair ordering breaks distance ties by lowest identity label.
      std::sort(candidates.begin(), candidates.end());
      std::vector<int> cluster = {seed_identity};
      for (int j = 0; j < config.k - 1; ++j) cluster.push_back(candidates[j].second);
      for (int id : cluster) unassigned.erase(id);
      clusters.push_back(std::move(cluster));
    }
    for (int id : unassigned) clusters.back().push_back(id);

    for (auto& cluster : clusters) {
      std::sort(cluster.begin(), cluster.end());
      std::vector<const Image*> members;
      for (int id : cluster) {
        for (size_t m : by_identity[id]) members.push_back(&dataset[m].pixels);
      }
      const Image centroid = MeanImage(members);
      std::vector<const Image*> reps;
      std::vector<std::string> rep_ids;
      for (int id : cluster) {
        size_t best = by_identity[id].front();
        double best_d = std::numeric_limits<double>::infinity();
        for (size_t m : by_identity[id]) {
          const double d = SquaredDistance(centroid, dataset[m].pixels);
          if (d < best_d) {
            best_d = d;
            best = m;
          }
        }
        reps.push_back(&dataset[best].pixels);
        rep_ids.push_back(dataset[best].id);
      }
      Image averaged = MeanImage(reps);
      averaged.Clamp01();
      for (int id : cluster) {
        for (size_t m : by_identity[id]) {
          PrivatizedImage& out = outputs[m];
          out.pixels = averaged;
          out.method = PrivatizationMethod::kKSame;
          out.params = "k=" + std::to_string(config.k);
          out.source_ids = rep_ids;
          out.source_identities = cluster;
          out.original_sample_id = dataset[m].id;
          out.original_identity = dataset[m].identity;
          out.original_pathology = dataset[m].pathology;
          out.seed = seed;
        }
      }
    }
  }
  return outputs;
}

AnonymityReport VerifyKAnonymity(const std::vector<PrivatizedImage>& outputs,
                                 int k) {
  AnonymityReport report;
  for (const PrivatizedImage& out : outputs) {
    if (out.source_ids.empty() || out.source_identities.empty() ||
        out.original_sample_id.empty()) {
      throw std::invalid_argument("verify_k_anonymity: output '" +
                                  out.original_sample_id +
                                  "' is missing provenance");
    }
    std::set<int> distinct(out.source_identities.begin(),
                           out.source_identities.end());
    bool ok = static_cast<int>(distinct.size()) >= k;
    if (ok && out.method == PrivatizationMethod::kKSame) {
      ok = out.original_identity && distinct.count(*out.original_identity) > 0;
    }
    if (!ok) {
      report.pass = false;
      report.violating_ids.push_back(out.original_sample_id);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Privatized set IO

namespace {

std::string Join(const std::vector<std::string>& items, char sep) {
  std::string s;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) s += sep;
    s += items[i];
  }
  return s;
}

std::vector<std::string> SplitOn(const std::string& text, char sep) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (text.back() == sep) out.emplace_back();
  return out;
}

constexpr char kPrivatizedHeader[] =
    "id,path,method,params,original_id,replacement_identity,source_ids";

}  // namespace

void WritePrivatizedSet(const std::vector<PrivatizedImage>& images,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  std::ofstream out(dir / "manifest.csv");
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.csv").string());
  out << kPrivatizedHeader << "\n";
  for (const PrivatizedImage& img : images) {
    const std::string id = img.original_sample_id;
    WritePgm(dir / "images" / (id + ".pgm"), img.pixels);
    std::string params = img.params;
    if (img.method == PrivatizationMethod::kPprlVganAvg) {
      // Averaged sets draw identities that have no source sample; keep them.
      std::vector<std::string> ids;
      for (int v : img.source_identities) ids.push_back(std::to_string(v));
      params += " identities=" + Join(ids, '|');
    }
    out << id << ",images/" << id << ".pgm," << MethodName(img.method) << ","
        << params << "," << img.original_sample_id << ","
        << (img.replacement_identity ? std::to_string(*img.replacement_identity)
                                     : std::string())
        << "," << Join(img.source_ids, ';') << "\n";
  }
}

std::vector<PrivatizedImage> ReadPrivatizedSet(const std::filesystem::path& dir,
                                               const Dataset& lookup) {
  const auto manifest = dir / "manifest.csv";
  std::ifstream in(manifest);
  if (!in) throw MissingArtifactError("missing privatized set " + manifest.string());
  std::string line;
  std::getline(in, line);
  while (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kPrivatizedHeader) {
    throw LoadError(manifest.string() + ": unexpected header '" + line + "'");
  }
  std::vector<PrivatizedImage> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    while (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = manifest.string() + " row " + std::to_string(row) + ": ";
    const auto f = SplitOn(line, ',');
    if (f.size() != 7) throw LoadError(where + "expected 7 fields");
    try {
      PrivatizedImage img;
      img.pixels = ReadImage(dir / f[1]);
      img.method = ParseMethod(f[2]);
      img.params = f[3];
      img.original_sample_id = f[4];
      if (!f[5].empty()) img.replacement_identity = std::stoi(f[5]);
      img.source_ids = SplitOn(f[6], ';');
      std::set<int> identities;
      for (const auto& sid : img.source_ids) {
        const ImageSample* s = lookup.Find(sid);
        if (!s) throw std::invalid_argument("unknown source id '" + sid + "'");
        identities.insert(s->identity);
      }
      const auto marker = img.params.find(" identities=");
      if (marker != std::string::npos) {
        for (const auto& v : SplitOn(img.params.substr(marker + 12), '|')) {
          identities.insert(std::stoi(v));
        }
        img.params = img.params.substr(0, marker);
      }
      img.source_identities.assign(identities.begin(), identities.end());
      if (const ImageSample* s = lookup.Find(img.original_sample_id)) {
        img.original_identity = s->identity;
        img.original_pathology = s->pathology;
      }
      out.push_back(std::move(img));
    } catch (const LoadError&) {
      throw;
    } catch (const std::exception& e) {
      throw LoadError(where + e.what());
    }
  }
  return out;
}

}  // namespace privex
