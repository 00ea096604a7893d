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

#ifndef PRIVEX_CLASSIFIER_H_
#define PRIVEX_CLASSIFIER_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "privex/dataset.h"
#include "privex/image.h"
#include "privex/network.h"
#include "privex/optimizer.h"
#include "privex/tensor.h"

namespace privex {

enum class ClassifierTarget { kIdentity, kPathology };

std::string TargetName(ClassifierTarget target);
ClassifierTarget ParseTarget(const std::string& text);

// The network emits unnormalized class scores; softmax lives in the loss.
struct ClassifierState {
  ClassifierTarget target = ClassifierTarget::kIdentity;
  NetworkSpec spec;
  ParameterSet params;
  std::vector<int> label_space;  // ascending
  double val_accuracy = 0.0;
  int best_epoch = 0;
};

struct ClassifierHyperparams {
  std::array<int, 3> channels{8, 16, 32};
  int epochs = 30;
  int batch_size = 16;
  OptimizerConfig optimizer{OptimizerConfig::Kind::kAdam, 1e-3, 0.9, 0.999,
                            1e-8, std::nullopt};
  bool bias = true;

  void Validate() const;
};

// Three stride-2 relu convolutions, flatten, dense head sized to the labels.
NetworkSpec ClassifierNetwork(int resolution, int n_classes,
                              const std::array<int, 3>& channels, bool bias);

// Softmax cross-entropy training with per-epoch validation; returns the
// parameters of the best validation epoch (epoch 0 = initialization).
ClassifierState TrainClassifier(const Dataset& train, const Dataset& val,
                                ClassifierTarget target,
                                const ClassifierHyperparams& hyper,
                                uint64_t seed);

int LabelOf(const ImageSample& sample, ClassifierTarget target);

// Class scores (N, K) for a batch of images.
Tensor ClassScores(const ClassifierState& model,
                   std::span<const Image* const> images);

// Predicted labels; argmax ties go to the lowest label index.
std::vector<int> PredictLabels(const ClassifierState& model,
                               std::span<const Image* const> images);
int PredictLabel(const ClassifierState& model, const Image& image);

// Fraction of samples whose predicted label equals LabelOf(sample, target).
double Accuracy(const ClassifierState& model, const Dataset& samples);

void SaveClassifier(const std::filesystem::path& prefix,
                    const ClassifierState& model);
ClassifierState LoadClassifier(const std::filesystem::path& prefix);

}  // namespace privex

#endif  // PRIVEX_CLASSIFIER_H_
