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

#ifndef PRIVEX_NETWORK_H_
#define PRIVEX_NETWORK_H_

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "privex/tensor.h"

namespace privex {

struct DenseLayer {
  int in = 0;
  int out = 0;
  bool bias = true;
};

struct Conv2dLayer {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 0;
  bool bias = true;
};

struct ReluLayer {};
struct SigmoidLayer {};
// Softmax over the last dimension of a (N, K) tensor.
struct SoftmaxLayer {};
struct FlattenLayer {};
// Nearest-neighbour 2x spatial upsampling.
struct Upsample2xLayer {};
// Appends a (N, width) condition tensor to a flat (N, F) activation.
struct ConcatConditionLayer {
  int width = 0;
};
// Reshapes a flat (N, C*H*W) activation to (N, C, H, W).
struct UnflattenLayer {
  int channels = 0;
  int height = 0;
  int width = 0;
};

using LayerKind =
    std::variant<DenseLayer, Conv2dLayer, ReluLayer, SigmoidLayer, SoftmaxLayer,
                 FlattenLayer, Upsample2xLayer, ConcatConditionLayer,
                 UnflattenLayer>;

struct LayerSpec {
  std::string name;
  LayerKind kind;
};

std::string LayerKindName(const LayerKind& kind);

// Ordered layer list plus the per-sample input shape. Construction checks that
// adjacent layer shapes compose.
class NetworkSpec {
 public:
  NetworkSpec() = default;
  NetworkSpec(Shape input_shape, std::vector<LayerSpec> layers);

  const Shape& input_shape() const { return input_shape_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  // Per-sample shape entering layer i; index layers().size() is the output.
  const Shape& shape_before(size_t i) const { return shapes_[i]; }
  const Shape& output_shape() const { return shapes_.back(); }

  // Width of the concat_condition layer, or nullopt when unconditioned.
  std::optional<int> condition_width() const;

  // (name, shape) of every parameter tensor, in layer order.
  std::vector<std::pair<std::string, Shape>> ParameterShapes() const;
  size_t ParameterCount() const;

  // Stable structural hash used to detect stale activation tapes.
  uint64_t Fingerprint() const;

 private:
  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;
};

// Fluent construction; unnamed layers get "<kind><index>" names.
class NetworkBuilder {
 public:
  explicit NetworkBuilder(Shape input_shape, std::string prefix = "");

  NetworkBuilder& Dense(int in, int out, bool bias = true);
  NetworkBuilder& Conv2d(int in_channels, int out_channels, int kernel,
                         int stride, int pad, bool bias = true);
  NetworkBuilder& Relu();
  NetworkBuilder& Sigmoid();
  NetworkBuilder& Softmax();
  NetworkBuilder& Flatten();
  NetworkBuilder& Upsample2x();
  NetworkBuilder& ConcatCondition(int width);
  NetworkBuilder& Unflatten(int channels, int height, int width);

  NetworkSpec Build() const;

 private:
  NetworkBuilder& Add(LayerKind kind);

  Shape input_shape_;
  std::string prefix_;
  std::vector<LayerSpec> layers_;
};

// Activations retained by Forward for use by Backward.
template <typename T>
struct Tape {
  uint64_t fingerprint = 0;
  std::vector<BasicTensor<T>> inputs;   // input of each layer
  std::vector<BasicTensor<T>> outputs;  // output of each layer
  bool has_condition = false;
};

template <typename T>
struct ForwardResult {
  BasicTensor<T> output;
  Tape<T> tape;
};

template <typename T>
struct Gradients {
  BasicParameterSet<T> params;
  BasicTensor<T> input;
  BasicTensor<T> condition;  // empty when the network is unconditioned
};

// Batched forward pass; `input` is (N, input_shape...). Parameters are looked
// up by "<layer>.weight"/"<layer>.bias", so several networks may share one
// ParameterSet. Throws std::invalid_argument naming the offending layer on
// shape mismatch.
template <typename T>
ForwardResult<T> Forward(const NetworkSpec& spec,
                         const BasicParameterSet<T>& params,
                         const BasicTensor<T>& input,
                         const BasicTensor<T>* condition = nullptr);

// Forward pass without retaining activations.
template <typename T>
BasicTensor<T> Predict(const NetworkSpec& spec,
                       const BasicParameterSet<T>& params,
                       const BasicTensor<T>& input,
                       const BasicTensor<T>* condition = nullptr);

// Exact reverse-mode gradients of the map computed by Forward, given the
// gradient of a scalar loss with respect to the network output.
template <typename T>
Gradients<T> Backward(const NetworkSpec& spec,
                      const BasicParameterSet<T>& params, const Tape<T>& tape,
                      const BasicTensor<T>& output_grad);

// Glorot-uniform weights (a = sqrt(6 / (fan_in + fan_out))), zero biases.
template <typename T>
BasicParameterSet<T> InitParameters(const NetworkSpec& spec, uint64_t seed);

template <typename T>
BasicParameterSet<T> ZeroParameters(const NetworkSpec& spec);

// Low-level kernels shared with relevance propagation.
// input (N, C, H, W), weight (O, C, k, k), bias (O) or null.
template <typename T>
BasicTensor<T> Conv2dForward(const BasicTensor<T>& input,
                             const BasicTensor<T>& weight,
                             const BasicTensor<T>* bias, int stride, int pad);

// Gradient of Conv2dForward with respect to its input (transposed conv).
template <typename T>
BasicTensor<T> Conv2dBackwardInput(const BasicTensor<T>& grad_out,
                                   const BasicTensor<T>& weight,
                                   const Shape& input_shape, int stride,
                                   int pad);

// x (N, in), weight (out, in), bias (out) or null -> (N, out).
template <typename T>
BasicTensor<T> DenseForward(const BasicTensor<T>& x,
                            const BasicTensor<T>& weight,
                            const BasicTensor<T>* bias);

// grad_out (N, out), weight (out, in) -> (N, in).
template <typename T>
BasicTensor<T> DenseBackwardInput(const BasicTensor<T>& grad_out,
                                  const BasicTensor<T>& weight);

}  // namespace privex

#endif  // PRIVEX_NETWORK_H_
