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

#include "privex/deep_taylor.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "privex/checkpoint.h"

namespace privex {

namespace {

using DTensor = BasicTensor<double>;
constexpr double kStabilizer = 1e-9;

DTensor PositivePart(const DTensor& t) {
  DTensor out = t;
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
  return out;
}

DTensor NegativePart(const DTensor& t) {
  DTensor out = t;
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::min(0.0, out[i]);
  return out;
}

double Sum(const DTensor& t) {
  return std::accumulate(t.data().begin(), t.data().end(), 0.0);
}

struct Propagation {
  std::vector<DTensor> relevance;  // relevance entering each layer, by index
  int predicted_class = 0;
  double score = 0.0;
};

// Applies W (through a forward/transpose pair) to the weighted-layer rules.
template <typename FwdFn, typename BackFn>
DTensor PropagateWeighted(const DTensor& input, const DTensor& weight,
                          const DTensor* bias, const DTensor& relevance,
                          bool bounded, FwdFn fwd, BackFn back) {
  DTensor z;
  DTensor wpos = PositivePart(weight);
  DTensor wneg = NegativePart(weight);
  DTensor ones(input.shape(), 1.0);
  if (bounded) {
    z = fwd(input, weight);
    const DTensor zneg = fwd(ones, wneg);
    for (size_t i = 0; i < z.size(); ++i) z[i] -= zneg[i];
  } else {
    z = fwd(input, wpos);
  }
  // Per output unit bias term, matching z's layout.
  const size_t per_unit = bias ? z.size() / (z.dim(0) * bias->size()) : 0;
  DTensor s = z;
  for (size_t i = 0; i < z.size(); ++i) {
    double denom = z[i] + kStabilizer;
    if (bias) denom += std::max(0.0, (*bias)[(i / per_unit) % bias->size()]);
    s[i] = relevance[i] / denom;
  }
  DTensor out;
  if (bounded) {
    const DTensor c = back(s, weight);
    const DTensor cneg = back(s, wneg);
    out = c;
    for (size_t i = 0; i < out.size(); ++i) {
      out[i] = std::max(0.0, input[i] * c[i] - cneg[i]);
    }
  } else {
    const DTensor c = back(s, wpos);
    out = c;
    for (size_t i = 0; i < out.size(); ++i) out[i] = input[i] * c[i];
  }
  return out;
}

Propagation Propagate(const NetworkSpec& spec, const ParameterSet& params,
                      const Image& image, std::optional<int> class_index) {
  const auto& layers = spec.layers();
  size_t n_layers = layers.size();
  if (n_layers > 0 && std::holds_alternative<SoftmaxLayer>(layers.back().kind)) {
    --n_layers;
  }
  // Validate layer kinds and locate the first weighted layer.
  std::optional<size_t> first_weighted;
  for (size_t i = 0; i < n_layers; ++i) {
    const auto& kind = layers[i].kind;
    const bool weighted = std::holds_alternative<DenseLayer>(kind) ||
                          std::holds_alternative<Conv2dLayer>(kind);
    const bool passive = std::holds_alternative<ReluLayer>(kind) ||
                         std::holds_alternative<FlattenLayer>(kind) ||
                         std::holds_alternative<UnflattenLayer>(kind);
    if (!weighted && !passive) {
      throw std::invalid_argument("deep_taylor: unsupported layer '" + layers[i].name +
                                  "' of kind " + LayerKindName(kind));
    }
    if (weighted && !first_weighted) first_weighted = i;
  }
  const Shape& in_shape = spec.input_shape();
  if (in_shape.size() != 3 || in_shape[0] != 1 || in_shape[1] != image.rows() ||
      in_shape[2] != image.cols()) {
    throw std::invalid_argument("deep_taylor: image is " + std::to_string(image.rows()) +
                                "x" + std::to_string(image.cols()) +
                                ", network expects " + ShapeString(in_shape));
  }
  for (float p : image.pixels()) {
    if (!(p >= 0.0f && p <= 1.0f)) {
      throw std::invalid_argument("deep_taylor: pixels must lie in [0, 1]");
    }
  }

  const BasicParameterSet<double> dparams = params.Cast<double>();
  const NetworkSpec trimmed(
      in_shape, std::vector<LayerSpec>(layers.begin(), layers.begin() + n_layers));
  DTensor x({1, 1, image.rows(), image.cols()});
  std::copy(image.pixels().begin(), image.pixels().end(), x.raw());
  const auto fwd = Forward(trimmed, dparams, x);
  const DTensor& scores = fwd.output;
  if (scores.rank() != 2) {
    throw std::invalid_argument("deep_taylor: network output must be a score vector");
  }
  const int k = scores.dim(1);
  Propagation prop;
  prop.predicted_class = class_index.value_or(static_cast<int>(
      std::max_element(scores.raw(), scores.raw() + k) - scores.raw()));
  if (prop.predicted_class < 0 || prop.predicted_class >= k) {
    throw std::invalid_argument("deep_taylor: class index out of range");
  }
  prop.score = scores[prop.predicted_class];

  prop.relevance.assign(n_layers + 1, DTensor());
  DTensor r(scores.shape(), 0.0);
  r[prop.predicted_class] = std::max(0.0, prop.score);
  prop.relevance[n_layers] = r;
  for (size_t li = n_layers; li-- > 0;) {
    const LayerSpec& layer = layers[li];
    const DTensor& a = fwd.tape.inputs[li];
    const bool bounded = first_weighted && li == *first_weighted;
    if (const auto* d = std::get_if<DenseLayer>(&layer.kind)) {
      const DTensor& w = dparams.at(layer.name + ".weight");
      const DTensor* b = d->bias ? &dparams.at(layer.name + ".bias") : nullptr;
      r = PropagateWeighted(
          a, w, b, r, bounded,
          [](const DTensor& in, const DTensor& wt) {
            return DenseForward<double>(in, wt, nullptr);
          },
          [](const DTensor& g, const DTensor& wt) {
            return DenseBackwardInput<double>(g, wt);
          });
    } else if (const auto* c = std::get_if<Conv2dLayer>(&layer.kind)) {
      const DTensor& w = dparams.at(layer.name + ".weight");
      const DTensor* b = c->bias ? &dparams.at(layer.name + ".bias") : nullptr;
      const int stride = c->stride, pad = c->pad;
      const Shape shape = a.shape();
      r = PropagateWeighted(
          a, w, b, r, bounded,
          [=](const DTensor& in, const DTensor& wt) {
            return Conv2dForward<double>(in, wt, nullptr, stride, pad);
          },
          [=](const DTensor& g, const DTensor& wt) {
            return Conv2dBackwardInput<double>(g, wt, shape, stride, pad);
          });
    } else if (std::holds_alternative<ReluLayer>(layer.kind)) {
      // relevance passes through unchanged
    } else {
      r = r.Reshaped(a.shape());
    }
    prop.relevance[li] = r;
  }
  return prop;
}

}  // namespace

double RelevanceMap::Total() const {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

RelevanceMap DeepTaylor(const NetworkSpec& spec, const ParameterSet& params,
                        const Image& image, std::optional<int> class_index) {
  const Propagation prop = Propagate(spec, params, image, class_index);
  RelevanceMap map;
  map.rows = image.rows();
  map.cols = image.cols();
  const auto rel = prop.relevance.front().data();
  map.values.assign(rel.begin(), rel.end());
  for (double& v : map.values) v = std::max(0.0, v);
  map.predicted_class = prop.predicted_class;
  map.output_score = prop.score;
  return map;
}

RelevanceMap DeepTaylor(const ClassifierState& model, const Image& image,
                        std::optional<int> class_index) {
  return DeepTaylor(model.spec, model.params, image, class_index);
}

std::vector<double> RelevanceTotals(const NetworkSpec& spec, const ParameterSet& params,
                                    const Image& image, std::optional<int> class_index) {
  const Propagation prop = Propagate(spec, params, image, class_index);
  std::vector<double> totals;
  for (const DTensor& r : prop.relevance) totals.push_back(Sum(r));
  return totals;
}

void WriteRelevance(const RelevanceMap& map, const std::filesystem::path& pgm_path) {
  const double peak = map.values.empty()
                          ? 0.0
                          : *std::max_element(map.values.begin(), map.values.end());
  std::vector<float> px(map.values.size());
  std::vector<float> raw(map.values.size());
  for (size_t i = 0; i < px.size(); ++i) {
    px[i] = peak > 0.0 ? static_cast<float>(map.values[i] / peak) : 0.0f;
    raw[i] = static_cast<float>(map.values[i]);
  }
  WritePgm(pgm_path, Image(map.rows, map.cols, std::move(px)));
  ParameterSet sidecar;
  sidecar.Set("relevance", Tensor({map.rows, map.cols}, std::move(raw)));
  std::filesystem::path side = pgm_path;
  side.replace_extension(".psck");
  SaveCheckpoint(side, sidecar);
}

}  // namespace privex
