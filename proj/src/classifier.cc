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

#include "privex/classifier.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "privex/checkpoint.h"
#include "privex/error.h"
#include "privex/rng.h"

namespace privex {

namespace {

constexpr size_t kInferenceChunk = 64;

Tensor StackImages(std::span<const Image* const> images) {
  const int rows = images.front()->rows();
  const int cols = images.front()->cols();
  Tensor x({static_cast<int>(images.size()), 1, rows, cols});
  const size_t plane = static_cast<size_t>(rows) * cols;
  for (size_t i = 0; i < images.size(); ++i) {
    if (images[i]->rows() != rows || images[i]->cols() != cols) {
      throw std::invalid_argument("classifier batch mixes image sizes");
    }
    std::copy(images[i]->pixels().begin(), images[i]->pixels().end(),
              x.raw() + i * plane);
  }
  return x;
}

int LabelIndex(const std::vector<int>& space, int label) {
  auto it = std::lower_bound(space.begin(), space.end(), label);
  if (it == space.end() || *it != label) return -1;
  return static_cast<int>(it - space.begin());
}

double ValAccuracy(const ClassifierState& model, const Dataset& val) {
  return val.empty() ? 0.0 : Accuracy(model, val);
}

}  // namespace

std::string TargetName(ClassifierTarget target) {
  return target == ClassifierTarget::kIdentity ? "identity" : "pathology";
}

ClassifierTarget ParseTarget(const std::string& text) {
  if (text == "identity") return ClassifierTarget::kIdentity;
  if (text == "pathology") return ClassifierTarget::kPathology;
  throw std::invalid_argument("unknown classifier target '" + text + "'");
}

void ClassifierHyperparams::Validate() const {
  for (int c : channels) {
    if (c < 1) throw std::invalid_argument("classifier channels must be >= 1");
  }
  if (epochs < 0) throw std::invalid_argument("classifier epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("classifier batch_size must be >= 1");
  optimizer.Validate();
}

NetworkSpec ClassifierNetwork(int resolution, int n_classes,
                              const std::array<int, 3>& channels, bool bias) {
  if (resolution < 8 || resolution % 8 != 0) {
    throw std::invalid_argument("classifier resolution must be a multiple of 8");
  }
  const int s = resolution / 8;
  return NetworkBuilder({1, resolution, resolution}, "cls_")
      .Conv2d(1, channels[0], 3, 2, 1, bias).Relu()
      .Conv2d(channels[0], channels[1], 3, 2, 1, bias).Relu()
      .Conv2d(channels[1], channels[2], 3, 2, 1, bias).Relu()
      .Flatten()
      .Dense(channels[2] * s * s, n_classes, bias)
      .Build();
}

int LabelOf(const ImageSample& sample, ClassifierTarget target) {
  return target == ClassifierTarget::kIdentity ? sample.identity : sample.pathology;
}

ClassifierState TrainClassifier(const Dataset& train, const Dataset& val,
                                ClassifierTarget target,
                                const ClassifierHyperparams& hyper,
                                uint64_t seed) {
  hyper.Validate();
  if (train.empty()) throw std::invalid_argument("train_classifier: empty training set");
  ClassifierState state;
  state.target = target;
  if (target == ClassifierTarget::kIdentity) {
    state.label_space = train.identities();
    for (const ImageSample& s : val.samples()) {
      if (LabelIndex(state.label_space, s.identity) < 0) {
        throw std::invalid_argument("train_classifier: validation identity " +
                                    std::to_string(s.identity) +
                                    " absent from the training set");
      }
    }
  } else {
    const auto& counts = train.class_counts();
    if (counts[0] == 0 || counts[1] == 0) {
      throw std::invalid_argument(
          "train_classifier: pathology training set contains a single class");
    }
    state.label_space = {0, 1};
  }
  const int resolution = train[0].pixels.rows();
  if (train[0].pixels.cols() != resolution) {
    throw std::invalid_argument("train_classifier: images must be square");
  }
  const int k = static_cast<int>(state.label_space.size());
  state.spec = ClassifierNetwork(resolution, k, hyper.channels, hyper.bias);
  state.params = InitParameters<float>(state.spec, DeriveSeed(seed, 0));
  state.val_accuracy = ValAccuracy(state, val);
  state.best_epoch = 0;
  ClassifierState best = state;

  Optimizer<float> opt(hyper.optimizer);
  std::vector<size_t> order(train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    Rng rng(DeriveSeed(seed, 1, static_cast<uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(hyper.batch_size));
      std::vector<const Image*> images;
      std::vector<int> labels;
      for (size_t i = start; i < end; ++i) {
        images.push_back(&train[order[i]].pixels);
        labels.push_back(LabelIndex(state.label_space, LabelOf(train[order[i]], target)));
      }
      const Tensor x = StackImages(images);
      auto fwd = Forward(state.spec, state.params, x);
      const int n = static_cast<int>(images.size());
      Tensor grad({n, k});
      double loss = 0.0;
      for (int i = 0; i < n; ++i) {
        const float* z = fwd.output.raw() + static_cast<size_t>(i) * k;
        const double m = *std::max_element(z, z + k);
        double sum = 0.0;
        for (int j = 0; j < k; ++j) sum += std::exp(z[j] - m);
        for (int j = 0; j < k; ++j) {
          const double p = std::exp(z[j] - m) / sum;
          grad[static_cast<size_t>(i) * k + j] =
              static_cast<float>((p - (j == labels[i] ? 1.0 : 0.0)) / n);
        }
        loss += -(z[labels[i]] - m - std::log(sum));
      }
      if (!std::isfinite(loss)) {
        throw NumericalError("train_classifier: non-finite loss in epoch " +
                             std::to_string(epoch));
      }
      opt.Step(state.params, Backward(state.spec, state.params, fwd.tape, grad).params);
    }
    const double acc = ValAccuracy(state, val);
    if (acc > best.val_accuracy) {
      best.params = state.params;
      best.val_accuracy = acc;
      best.best_epoch = epoch;
    }
  }
  return best;
}

Tensor ClassScores(const ClassifierState& model, std::span<const Image* const> images) {
  if (images.empty()) throw std::invalid_argument("no images to classify");
  return Predict(model.spec, model.params, StackImages(images));
}

std::vector<int> PredictLabels(const ClassifierState& model,
                               std::span<const Image* const> images) {
  std::vector<int> labels;
  labels.reserve(images.size());
  const int k = static_cast<int>(model.label_space.size());
  for (size_t start = 0; start < images.size(); start += kInferenceChunk) {
    const size_t end = std::min(images.size(), start + kInferenceChunk);
    const Tensor scores = ClassScores(model, images.subspan(start, end - start));
    for (size_t i = 0; i < end - start; ++i) {
      const float* z = scores.raw() + i * k;
      labels.push_back(model.label_space[std::max_element(z, z + k) - z]);
    }
  }
  return labels;
}

int PredictLabel(const ClassifierState& model, const Image& image) {
  const Image* p = &image;
  return PredictLabels(model, std::span<const Image* const>(&p, 1)).front();
}

double Accuracy(const ClassifierState& model, const Dataset& samples) {
  if (samples.empty()) throw std::invalid_argument("accuracy: empty sample set");
  std::vector<const Image*> images;
  for (const ImageSample& s : samples.samples()) images.push_back(&s.pixels);
  const auto predicted = PredictLabels(model, images);
  size_t correct = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    correct += predicted[i] == LabelOf(samples[i], model.target);
  }
  return static_cast<double>(correct) / samples.size();
}

void SaveClassifier(const std::filesystem::path& prefix, const ClassifierState& model) {
  SaveCheckpoint(prefix.string() + ".psck", model.params);
  std::string labels;
  for (size_t i = 0; i < model.label_space.size(); ++i) {
    if (i) labels += ";";
    labels += std::to_string(model.label_space[i]);
  }
  const Shape& in = model.spec.input_shape();
  const auto shapes = model.spec.ParameterShapes();
  // Channel widths are recovered from the conv weight shapes.
  std::string channels;
  int convs = 0;
  for (const auto& [name, shape] : shapes) {
    if (shape.size() == 4) {
      channels += (convs++ ? ";" : "") + std::to_string(shape[0]);
    }
  }
  bool bias = false;
  for (const auto& [name, shape] : shapes) {
    if (name.ends_with(".bias")) bias = true;
  }
  SaveMetadata(prefix.string() + ".meta",
               {{"target", TargetName(model.target)},
                {"resolution", std::to_string(in[1])},
                {"labels", labels},
                {"channels", channels},
                {"bias", bias ? "1" : "0"},
                {"val_accuracy", std::to_string(model.val_accuracy)},
                {"best_epoch", std::to_string(model.best_epoch)}});
}

ClassifierState LoadClassifier(const std::filesystem::path& prefix) {
  const auto meta = LoadMetadata(prefix.string() + ".meta");
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw LoadError("classifier metadata lacks '" + key + "'");
    return it->second;
  };
  auto ints = [](const std::string& text) {
    std::vector<int> out;
    size_t pos = 0;
    while (pos < text.size()) {
      size_t next = text.find(';', pos);
      if (next == std::string::npos) next = text.size();
      out.push_back(std::stoi(text.substr(pos, next - pos)));
      pos = next + 1;
    }
    return out;
  };
  ClassifierState model;
  model.target = ParseTarget(get("target"));
  model.label_space = ints(get("labels"));
  const auto ch = ints(get("channels"));
  if (ch.size() != 3) throw LoadError("classifier metadata: bad channel list");
  model.spec = ClassifierNetwork(std::stoi(get("resolution")),
                                 static_cast<int>(model.label_space.size()),
                                 {ch[0], ch[1], ch[2]}, get("bias") == "1");
  model.val_accuracy = std::stod(get("val_accuracy"));
  model.best_epoch = std::stoi(get("best_epoch"));
  ParameterSet loaded = LoadCheckpoint(prefix.string() + ".psck");
  for (const auto& [name, shape] : model.spec.ParameterShapes()) {
    if (!loaded.Contains(name) || loaded.at(name).shape() != shape) {
      throw LoadError("classifier checkpoint lacks tensor '" + name + "'");
    }
    model.params.Set(name, loaded.at(name));
  }
  return model;
}

}  // namespace privex
