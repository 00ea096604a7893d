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

#include "privex/metrics.h"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace privex {

namespace {

void CheckPaired(size_t a, size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(a) +
                                " predictions vs " + std::to_string(b) + " labels");
  }
  if (a == 0) throw std::invalid_argument(std::string(what) + ": empty input");
}

std::vector<int> TrueLabels(const ClassifierState& model,
                            std::span<const PrivatizedImage> images) {
  std::vector<int> labels;
  for (const PrivatizedImage& img : images) {
    const auto& label = model.target == ClassifierTarget::kIdentity
                            ? img.original_identity
                            : img.original_pathology;
    if (!label) {
      throw std::invalid_argument("privatized image '" + img.original_sample_id +
                                  "' lacks its original " + TargetName(model.target) +
                                  " label");
    }
    labels.push_back(*label);
  }
  return labels;
}

}  // namespace

double AccuracyOf(std::span<const int> predictions, std::span<const int> labels) {
  CheckPaired(predictions.size(), labels.size(), "accuracy");
  size_t correct = 0;
  for (size_t i = 0; i < predictions.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / predictions.size();
}

double F1(std::span<const int> predictions, std::span<const int> labels) {
  CheckPaired(predictions.size(), labels.size(), "f1");
  size_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const bool p = predictions[i] == 1, y = labels[i] == 1;
    tp += p && y;
    fp += p && !y;
    fn += !p && y;
  }
  // 2PR / (P + R) reduces to 2TP / (2TP + FP + FN); one rounding.
  if (tp == 0) return 0.0;
  return static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
}

std::vector<int> PredictPrivatized(const ClassifierState& model,
                                   std::span<const PrivatizedImage> images) {
  if (images.empty()) throw std::invalid_argument("no privatized images to classify");
  std::vector<const Image*> ptrs;
  for (const PrivatizedImage& img : images) ptrs.push_back(&img.pixels);
  return PredictLabels(model, ptrs);
}

double PrivatizedAccuracy(const ClassifierState& model,
                          std::span<const PrivatizedImage> images) {
  const auto labels = TrueLabels(model, images);
  return AccuracyOf(PredictPrivatized(model, images), labels);
}

double PrivatizedF1(const ClassifierState& model,
                    std::span<const PrivatizedImage> images) {
  const auto labels = TrueLabels(model, images);
  return F1(PredictPrivatized(model, images), labels);
}

double ReplacementIdentityAccuracy(std::span<const int> predicted,
                                   std::span<const PrivatizedImage> images) {
  CheckPaired(predicted.size(), images.size(), "replacement_identity_accuracy");
  size_t hits = 0;
  for (size_t i = 0; i < images.size(); ++i) {
    if (!images[i].replacement_identity) {
      throw std::invalid_argument("privatized image '" + images[i].original_sample_id +
                                  "' has no replacement identity");
    }
    hits += predicted[i] == *images[i].replacement_identity;
  }
  return static_cast<double>(hits) / images.size();
}

double SourceLeakageAccuracy(std::span<const int> predicted,
                             std::span<const PrivatizedImage> images) {
  CheckPaired(predicted.size(), images.size(), "source_leakage_accuracy");
  size_t hits = 0;
  for (size_t i = 0; i < images.size(); ++i) {
    const auto& src = images[i].source_identities;
    if (src.empty() && !images[i].replacement_identity) {
      throw std::invalid_argument("privatized image '" + images[i].original_sample_id +
                                  "' carries no provenance");
    }
    hits += std::find(src.begin(), src.end(), predicted[i]) != src.end() ||
            images[i].replacement_identity == predicted[i];
  }
  return static_cast<double>(hits) / images.size();
}

double ReplacementIdentityAccuracy(const ClassifierState& model,
                                   std::span<const PrivatizedImage> images) {
  for (const PrivatizedImage& img : images) {
    if (!img.replacement_identity) {
      throw std::invalid_argument("privatized image '" + img.original_sample_id +
                                  "' has no replacement identity");
    }
  }
  return ReplacementIdentityAccuracy(PredictPrivatized(model, images), images);
}

double SourceLeakageAccuracy(const ClassifierState& model,
                             std::span<const PrivatizedImage> images) {
  return SourceLeakageAccuracy(PredictPrivatized(model, images), images);
}

}  // namespace privex
