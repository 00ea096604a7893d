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

#ifndef PRIVEX_METRICS_H_
#define PRIVEX_METRICS_H_

#include <span>
#include <vector>

#include "privex/classifier.h"
#include "privex/privatize_classic.h"

namespace privex {

// Fraction of positions where predictions[i] == labels[i].
double AccuracyOf(std::span<const int> predictions, std::span<const int> labels);

// Binary F1 with label 1 as the positive class; 0 when precision + recall = 0.
double F1(std::span<const int> predictions, std::span<const int> labels);

std::vector<int> PredictPrivatized(const ClassifierState& model,
                                   std::span<const PrivatizedImage> images);

// Accuracy against original_identity (identity model) or original_pathology
// (pathology model).
double PrivatizedAccuracy(const ClassifierState& model,
                          std::span<const PrivatizedImage> images);
double PrivatizedF1(const ClassifierState& model,
                    std::span<const PrivatizedImage> images);

// Fraction recognized as their replacement identity. Throws when an item has
// no replacement identity.
double ReplacementIdentityAccuracy(const ClassifierState& model,
                                   std::span<const PrivatizedImage> images);

// Fraction recognized as any contributing identity (sources plus the
// replacement). Throws when an item carries no provenance.
double SourceLeakageAccuracy(const ClassifierState& model,
                             std::span<const PrivatizedImage> images);

// Variants over precomputed predictions.
double ReplacementIdentityAccuracy(std::span<const int> predicted,
                                   std::span<const PrivatizedImage> images);
double SourceLeakageAccuracy(std::span<const int> predicted,
                             std::span<const PrivatizedImage> images);

}  // namespace privex

#endif  // PRIVEX_METRICS_H_
