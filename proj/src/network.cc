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

#include "privex/network.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "privex/rng.h"

namespace privex {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void LayerError(const LayerSpec& layer, const std::string& what) {
  throw std::invalid_argument("layer '" + layer.name + "' (" +
                              LayerKindName(layer.kind) + "): " + what);
}

int ConvOutSize(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

Shape InferShape(const LayerSpec& layer, const Shape& in) {
  return std::visit(
      Overloaded{
          [&](const DenseLayer& d) -> Shape {
            if (d.in <= 0 || d.out <= 0) LayerError(layer, "non-positive size");
            if (in.size() != 1 || in[0] != d.in) {
              LayerError(layer, "expects flat input of width " +
                                    std::to_string(d.in) + ", got " +
                                    ShapeString(in));
            }
            return {d.out};
          },
          [&](const Conv2dLayer& c) -> Shape {
            if (c.in_channels <= 0 || c.out_channels <= 0 || c.kernel <= 0 ||
                c.stride <= 0 || c.pad < 0) {
              LayerError(layer, "invalid convolution geometry");
            }
            if (in.size() != 3 || in[0] != c.in_channels) {
              LayerError(layer, "expects (" + std::to_string(c.in_channels) +
                                    ",H,W) input, got " + ShapeString(in));
            }
            const int ho = ConvOutSize(in[1], c.kernel, c.stride, c.pad);
            const int wo = ConvOutSize(in[2], c.kernel, c.stride, c.pad);
            if (ho <= 0 || wo <= 0) LayerError(layer, "kernel larger than input");
            return {c.out_channels, ho, wo};
          },
          [&](const ReluLayer&) -> Shape { return in; },
          [&](const SigmoidLayer&) -> Shape { return in; },
          [&](const SoftmaxLayer&) -> Shape {
            if (in.size() != 1) LayerError(layer, "expects flat input");
            return in;
          },
          [&](const FlattenLayer&) -> Shape {
            return {static_cast<int>(ShapeSize(in))};
          },
          [&](const Upsample2xLayer&) -> Shape {
            if (in.size() != 3) LayerError(layer, "expects (C,H,W) input");
            return {in[0], 2 * in[1], 2 * in[2]};
          },
          [&](const ConcatConditionLayer& c) -> Shape {
            if (c.width <= 0) LayerError(layer, "non-positive width");
            if (in.size() != 1) LayerError(layer, "expects flat input");
            return {in[0] + c.width};
          },
          [&](const UnflattenLayer& u) -> Shape {
            if (in.size() != 1 ||
                static_cast<size_t>(in[0]) !=
                    static_cast<size_t>(u.channels) * u.height * u.width) {
              LayerError(layer, "cannot reshape " + ShapeString(in));
            }
            return {u.channels, u.height, u.width};
          },
      },
      layer.kind);
}

}  // namespace

std::string LayerKindName(const LayerKind& kind) {
  return std::visit(
      Overloaded{
          [](const DenseLayer&) { return std::string("dense"); },
          [](const Conv2dLayer&) { return std::string("conv2d"); },
          [](const ReluLayer&) { return std::string("relu"); },
          [](const SigmoidLayer&) { return std::string("sigmoid"); },
          [](const SoftmaxLayer&) { return std::string("softmax"); },
          [](const FlattenLayer&) { return std::string("flatten"); },
          [](const Upsample2xLayer&) { return std::string("upsample2x"); },
          [](const ConcatConditionLayer&) {
            return std::string("concat_condition");
          },
          [](const UnflattenLayer&) { return std::string("unflatten"); },
      },
      kind);
}

NetworkSpec::NetworkSpec(Shape input_shape, std::vector<LayerSpec> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  shapes_.push_back(input_shape_);
  int concat_count = 0;
  for (const LayerSpec& layer : layers_) {
    if (std::holds_alternative<ConcatConditionLayer>(layer.kind)) {
      ++concat_count;
    }
    shapes_.push_back(InferShape(layer, shapes_.back()));
  }
  if (concat_count > 1) {
    throw std::invalid_argument("at most one concat_condition layer allowed");
  }
}

std::optional<int> NetworkSpec::condition_width() const {
  for (const LayerSpec& layer : layers_) {
    if (auto* c = std::get_if<ConcatConditionLayer>(&layer.kind)) return c->width;
  }
  return std::nullopt;
}

std::vector<std::pair<std::string, Shape>> NetworkSpec::ParameterShapes() const {
  std::vector<std::pair<std::string, Shape>> out;
  for (const LayerSpec& layer : layers_) {
    if (auto* d = std::get_if<DenseLayer>(&layer.kind)) {
      out.emplace_back(layer.name + ".weight", Shape{d->out, d->in});
      if (d->bias) out.emplace_back(layer.name + ".bias", Shape{d->out});
    } else if (auto* c = std::get_if<Conv2dLayer>(&layer.kind)) {
      out.emplace_back(layer.name + ".weight",
                       Shape{c->out_channels, c->in_channels, c->kernel, c->kernel});
      if (c->bias) out.emplace_back(layer.name + ".bias", Shape{c->out_channels});
    }
  }
  return out;
}

size_t NetworkSpec::ParameterCount() const {
  size_t n = 0;
  for (const auto& [name, shape] : ParameterShapes()) n += ShapeSize(shape);
  return n;
}

uint64_t NetworkSpec::Fingerprint() const {
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  for (int d : input_shape_) mix(static_cast<uint64_t>(d));
  for (size_t i = 0; i < layers_.size(); ++i) {
    mix(layers_[i].kind.index());
    for (char ch : layers_[i].name) mix(static_cast<unsigned char>(ch));
    for (int d : shapes_[i + 1]) mix(static_cast<uint64_t>(d));
  }
  return h;
}

NetworkBuilder::NetworkBuilder(Shape input_shape, std::string prefix)
    : input_shape_(std::move(input_shape)), prefix_(std::move(prefix)) {}

NetworkBuilder& NetworkBuilder::Add(LayerKind kind) {
  std::string name =
      prefix_ + LayerKindName(kind) + std::to_string(layers_.size());
  layers_.push_back({std::move(name), std::move(kind)});
  return *this;
}

NetworkBuilder& NetworkBuilder::Dense(int in, int out, bool bias) {
  return Add(DenseLayer{in, out, bias});
}
NetworkBuilder& NetworkBuilder::Conv2d(int in_channels, int out_channels,
                                       int kernel, int stride, int pad,
                                       bool bias) {
  return Add(Conv2dLayer{in_channels, out_channels, kernel, stride, pad, bias});
}
NetworkBuilder& NetworkBuilder::Relu() { return Add(ReluLayer{}); }
NetworkBuilder& NetworkBuilder::Sigmoid() { return Add(SigmoidLayer{}); }
NetworkBuilder& NetworkBuilder::Softmax() { return Add(SoftmaxLayer{}); }
NetworkBuilder& NetworkBuilder::Flatten() { return Add(FlattenLayer{}); }
NetworkBuilder& NetworkBuilder::Upsample2x() { return Add(Upsample2xLayer{}); }
NetworkBuilder& NetworkBuilder::ConcatCondition(int width) {
  return Add(ConcatConditionLayer{width});
}
NetworkBuilder& NetworkBuilder::Unflatten(int channels, int height, int width) {
  return Add(UnflattenLayer{channels, height, width});
}

NetworkSpec NetworkBuilder::Build() const {
  return NetworkSpec(input_shape_, layers_);
}

// ---------------------------------------------------------------------------
// Kernels

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

struct ConvGeometry {
  int channels, height, width, kernel, stride, pad, out_h, out_w;
  int col_rows() const { return channels * kernel * kernel; }
  int col_cols() const { return out_h * out_w; }
};

template <typename T>
void Im2Col(const T* image, const ConvGeometry& g, T* col) {
  const int k = g.kernel;
  for (int c = 0; c < g.channels; ++c) {
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw) {
        T* dst = col + static_cast<size_t>((c * k + kh) * k + kw) * g.col_cols();
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * g.stride - g.pad + kh;
          T* row = dst + static_cast<size_t>(oh) * g.out_w;
          if (ih < 0 || ih >= g.height) {
            std::fill(row, row + g.out_w, T(0));
            continue;
          }
          const T* src = image + (static_cast<size_t>(c) * g.height + ih) * g.width;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * g.stride - g.pad + kw;
            row[ow] = (iw >= 0 && iw < g.width) ? src[iw] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void Col2ImAdd(const T* col, const ConvGeometry& g, T* image) {
  const int k = g.kernel;
  for (int c = 0; c < g.channels; ++c) {
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw) {
        const T* src =
            col + static_cast<size_t>((c * k + kh) * k + kw) * g.col_cols();
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * g.stride - g.pad + kh;
          if (ih < 0 || ih >= g.height) continue;
          T* dst = image + (static_cast<size_t>(c) * g.height + ih) * g.width;
          const T* row = src + static_cast<size_t>(oh) * g.out_w;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * g.stride - g.pad + kw;
            if (iw >= 0 && iw < g.width) dst[iw] += row[ow];
          }
        }
      }
    }
  }
}

ConvGeometry MakeGeometry(const Shape& input_shape, const Shape& weight_shape,
                          int stride, int pad) {
  if (input_shape.size() != 4 || weight_shape.size() != 4 ||
      input_shape[1] != weight_shape[1] || weight_shape[2] != weight_shape[3]) {
    throw std::invalid_argument("conv2d: incompatible input " +
                                ShapeString(input_shape) + " and weight " +
                                ShapeString(weight_shape));
  }
  ConvGeometry g{input_shape[1], input_shape[2], input_shape[3],
                 weight_shape[2], stride, pad, 0, 0};
  g.out_h = ConvOutSize(g.height, g.kernel, stride, pad);
  g.out_w = ConvOutSize(g.width, g.kernel, stride, pad);
  if (g.out_h <= 0 || g.out_w <= 0) {
    throw std::invalid_argument("conv2d: kernel larger than input");
  }
  return g;
}

}  // namespace

template <typename T>
BasicTensor<T> Conv2dForward(const BasicTensor<T>& input,
                             const BasicTensor<T>& weight,
                             const BasicTensor<T>* bias, int stride, int pad) {
  const ConvGeometry g = MakeGeometry(input.shape(), weight.shape(), stride, pad);
  const int n = input.dim(0);
  const int out_c = weight.dim(0);
  BasicTensor<T> out({n, out_c, g.out_h, g.out_w});
  std::vector<T> col(static_cast<size_t>(g.col_rows()) * g.col_cols());
  ConstMatrixMap<T> w(weight.raw(), out_c, g.col_rows());
  ConstMatrixMap<T> col_m(col.data(), g.col_rows(), g.col_cols());
  const size_t in_stride = static_cast<size_t>(g.channels) * g.height * g.width;
  const size_t out_stride = static_cast<size_t>(out_c) * g.col_cols();
  for (int i = 0; i < n; ++i) {
    Im2Col(input.raw() + i * in_stride, g, col.data());
    MatrixMap<T> y(out.raw() + i * out_stride, out_c, g.col_cols());
    y.noalias() = w * col_m;
    if (bias) {
      for (int o = 0; o < out_c; ++o) y.row(o).array() += (*bias)[o];
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> Conv2dBackwardInput(const BasicTensor<T>& grad_out,
                                   const BasicTensor<T>& weight,
                                   const Shape& input_shape, int stride,
                                   int pad) {
  const ConvGeometry g = MakeGeometry(input_shape, weight.shape(), stride, pad);
  const int n = input_shape[0];
  const int out_c = weight.dim(0);
  BasicTensor<T> grad_in(input_shape);
  std::vector<T> col(static_cast<size_t>(g.col_rows()) * g.col_cols());
  ConstMatrixMap<T> w(weight.raw(), out_c, g.col_rows());
  MatrixMap<T> col_m(col.data(), g.col_rows(), g.col_cols());
  const size_t in_stride = static_cast<size_t>(g.channels) * g.height * g.width;
  const size_t out_stride = static_cast<size_t>(out_c) * g.col_cols();
  for (int i = 0; i < n; ++i) {
    ConstMatrixMap<T> dy(grad_out.raw() + i * out_stride, out_c, g.col_cols());
    col_m.noalias() = w.transpose() * dy;
    Col2ImAdd(col.data(), g, grad_in.raw() + i * in_stride);
  }
  return grad_in;
}

template <typename T>
BasicTensor<T> DenseForward(const BasicTensor<T>& x,
                            const BasicTensor<T>& weight,
                            const BasicTensor<T>* bias) {
  const int n = x.dim(0);
  const int in = weight.dim(1);
  const int out = weight.dim(0);
  if (x.rank() != 2 || x.dim(1) != in) {
    throw std::invalid_argument("dense: input " + ShapeString(x.shape()) +
                                " does not match weight " +
                                ShapeString(weight.shape()));
  }
  BasicTensor<T> y({n, out});
  ConstMatrixMap<T> xm(x.raw(), n, in);
  ConstMatrixMap<T> wm(weight.raw(), out, in);
  MatrixMap<T> ym(y.raw(), n, out);
  ym.noalias() = xm * wm.transpose();
  if (bias) {
    for (int i = 0; i < n; ++i) {
      for (int o = 0; o < out; ++o) ym(i, o) += (*bias)[o];
    }
  }
  return y;
}

template <typename T>
BasicTensor<T> DenseBackwardInput(const BasicTensor<T>& grad_out,
                                  const BasicTensor<T>& weight) {
  const int n = grad_out.dim(0);
  const int in = weight.dim(1);
  const int out = weight.dim(0);
  BasicTensor<T> dx({n, in});
  ConstMatrixMap<T> dy(grad_out.raw(), n, out);
  ConstMatrixMap<T> wm(weight.raw(), out, in);
  MatrixMap<T> dxm(dx.raw(), n, in);
  dxm.noalias() = dy * wm;
  return dx;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

template <typename T>
const BasicTensor<T>& Param(const BasicParameterSet<T>& params,
                            const LayerSpec& layer, const std::string& suffix,
                            const Shape& expected) {
  const std::string name = layer.name + suffix;
  if (!params.Contains(name)) LayerError(layer, "missing parameter " + name);
  const BasicTensor<T>& t = params.at(name);
  if (t.shape() != expected) {
    LayerError(layer, "parameter " + name + " has shape " +
                          ShapeString(t.shape()) + ", expected " +
                          ShapeString(expected));
  }
  return t;
}

template <typename T>
BasicTensor<T> ApplyLayer(const LayerSpec& layer,
                          const BasicParameterSet<T>& params,
                          const BasicTensor<T>& x,
                          const BasicTensor<T>* condition) {
  const int n = x.dim(0);
  return std::visit(
      Overloaded{
          [&](const DenseLayer& d) {
            const auto& w = Param(params, layer, ".weight", {d.out, d.in});
            const BasicTensor<T>* b =
                d.bias ? &Param(params, layer, ".bias", {d.out}) : nullptr;
            return DenseForward(x, w, b);
          },
          [&](const Conv2dLayer& c) {
            const auto& w = Param(params, layer, ".weight",
                                  {c.out_channels, c.in_channels, c.kernel, c.kernel});
            const BasicTensor<T>* b =
                c.bias ? &Param(params, layer, ".bias", {c.out_channels}) : nullptr;
            return Conv2dForward(x, w, b, c.stride, c.pad);
          },
          [&](const ReluLayer&) {
            BasicTensor<T> y = x;
            for (T& v : y.storage()) v = v > T(0) ? v : T(0);
            return y;
          },
          [&](const SigmoidLayer&) {
            BasicTensor<T> y = x;
            for (T& v : y.storage()) {
              if (v >= T(0)) {
                v = T(1) / (T(1) + std::exp(-v));
              } else {
                const T e = std::exp(v);
                v = e / (T(1) + e);
              }
            }
            return y;
          },
          [&](const SoftmaxLayer&) {
            BasicTensor<T> y = x;
            const int k = x.dim(1);
            for (int i = 0; i < n; ++i) {
              T* row = y.raw() + static_cast<size_t>(i) * k;
              const T mx = *std::max_element(row, row + k);
              T sum = 0;
              for (int j = 0; j < k; ++j) {
                row[j] = std::exp(row[j] - mx);
                sum += row[j];
              }
              for (int j = 0; j < k; ++j) row[j] /= sum;
            }
            return y;
          },
          [&](const FlattenLayer&) {
            return x.Reshaped({n, static_cast<int>(x.size() / std::max(n, 1))});
          },
          [&](const Upsample2xLayer&) {
            const int ch = x.dim(1), h = x.dim(2), w = x.dim(3);
            BasicTensor<T> y({n, ch, 2 * h, 2 * w});
            for (int p = 0; p < n * ch; ++p) {
              const T* src = x.raw() + static_cast<size_t>(p) * h * w;
              T* dst = y.raw() + static_cast<size_t>(p) * 4 * h * w;
              for (int r = 0; r < 2 * h; ++r) {
                for (int c = 0; c < 2 * w; ++c) {
                  dst[static_cast<size_t>(r) * 2 * w + c] = src[(r / 2) * w + c / 2];
                }
              }
            }
            return y;
          },
          [&](const ConcatConditionLayer& cc) {
            if (!condition) LayerError(layer, "condition tensor required");
            if (condition->rank() != 2 || condition->dim(0) != n ||
                condition->dim(1) != cc.width) {
              LayerError(layer, "condition must be (" + std::to_string(n) + "," +
                                    std::to_string(cc.width) + "), got " +
                                    ShapeString(condition->shape()));
            }
            const int f = x.dim(1);
            BasicTensor<T> y({n, f + cc.width});
            for (int i = 0; i < n; ++i) {
              std::copy_n(x.raw() + static_cast<size_t>(i) * f, f,
                          y.raw() + static_cast<size_t>(i) * (f + cc.width));
              std::copy_n(condition->raw() + static_cast<size_t>(i) * cc.width,
                          cc.width,
                          y.raw() + static_cast<size_t>(i) * (f + cc.width) + f);
            }
            return y;
          },
          [&](const UnflattenLayer& u) {
            return x.Reshaped({n, u.channels, u.height, u.width});
          },
      },
      layer.kind);
}

template <typename T>
void CheckInput(const NetworkSpec& spec, const BasicTensor<T>& input,
                const BasicTensor<T>* condition) {
  if (input.rank() != static_cast<int>(spec.input_shape().size()) + 1 ||
      !std::equal(spec.input_shape().begin(), spec.input_shape().end(),
                  input.shape().begin() + 1)) {
    throw std::invalid_argument("network input " + ShapeString(input.shape()) +
                                " does not match (N," +
                                ShapeString(spec.input_shape()).substr(1));
  }
  if (spec.condition_width().has_value() != (condition != nullptr)) {
    throw std::invalid_argument(
        spec.condition_width() ? "network requires a condition tensor"
                               : "network does not take a condition tensor");
  }
}

}  // namespace

template <typename T>
ForwardResult<T> Forward(const NetworkSpec& spec,
                         const BasicParameterSet<T>& params,
                         const BasicTensor<T>& input,
                         const BasicTensor<T>* condition) {
  CheckInput(spec, input, condition);
  ForwardResult<T> result;
  result.tape.fingerprint = spec.Fingerprint();
  result.tape.has_condition = condition != nullptr;
  BasicTensor<T> x = input;
  for (const LayerSpec& layer : spec.layers()) {
    BasicTensor<T> y = ApplyLayer(layer, params, x, condition);
    result.tape.inputs.push_back(std::move(x));
    result.tape.outputs.push_back(y);
    x = std::move(y);
  }
  result.output = std::move(x);
  return result;
}

template <typename T>
BasicTensor<T> Predict(const NetworkSpec& spec,
                       const BasicParameterSet<T>& params,
                       const BasicTensor<T>& input,
                       const BasicTensor<T>* condition) {
  CheckInput(spec, input, condition);
  BasicTensor<T> x = input;
  for (const LayerSpec& layer : spec.layers()) {
    x = ApplyLayer(layer, params, x, condition);
  }
  return x;
}

template <typename T>
Gradients<T> Backward(const NetworkSpec& spec,
                      const BasicParameterSet<T>& params, const Tape<T>& tape,
                      const BasicTensor<T>& output_grad) {
  const auto& layers = spec.layers();
  if (tape.fingerprint != spec.Fingerprint() ||
      tape.inputs.size() != layers.size() ||
      tape.outputs.size() != layers.size()) {
    throw std::invalid_argument(
        "backward: activation tape is missing or was recorded for a different "
        "network");
  }
  if (!layers.empty() && output_grad.shape() != tape.outputs.back().shape()) {
    throw std::invalid_argument("backward: output gradient shape " +
                                ShapeString(output_grad.shape()) +
                                " does not match output " +
                                ShapeString(tape.outputs.back().shape()));
  }
  Gradients<T> grads;
  BasicTensor<T> g = output_grad;
  for (size_t li = layers.size(); li-- > 0;) {
    const LayerSpec& layer = layers[li];
    const BasicTensor<T>& x = tape.inputs[li];
    const BasicTensor<T>& y = tape.outputs[li];
    const int n = x.dim(0);
    g = std::visit(
        Overloaded{
            [&](const DenseLayer& d) {
              const auto& w = Param(params, layer, ".weight", {d.out, d.in});
              BasicTensor<T> dw({d.out, d.in});
              ConstMatrixMap<T> dy(g.raw(), n, d.out);
              ConstMatrixMap<T> xm(x.raw(), n, d.in);
              MatrixMap<T> dwm(dw.raw(), d.out, d.in);
              dwm.noalias() = dy.transpose() * xm;
              grads.params.Set(layer.name + ".weight", std::move(dw));
              if (d.bias) {
                BasicTensor<T> db({d.out});
                for (int i = 0; i < n; ++i) {
                  for (int o = 0; o < d.out; ++o) db[o] += dy(i, o);
                }
                grads.params.Set(layer.name + ".bias", std::move(db));
              }
              return DenseBackwardInput(g, w);
            },
            [&](const Conv2dLayer& c) {
              const auto& w = Param(params, layer, ".weight",
                                    {c.out_channels, c.in_channels, c.kernel, c.kernel});
              const ConvGeometry geo = MakeGeometry(x.shape(), w.shape(), c.stride, c.pad);
              BasicTensor<T> dw(w.shape());
              BasicTensor<T> db({c.out_channels});
              std::vector<T> col(static_cast<size_t>(geo.col_rows()) * geo.col_cols());
              ConstMatrixMap<T> col_m(col.data(), geo.col_rows(), geo.col_cols());
              MatrixMap<T> dwm(dw.raw(), c.out_channels, geo.col_rows());
              const size_t in_stride =
                  static_cast<size_t>(geo.channels) * geo.height * geo.width;
              const size_t out_stride =
                  static_cast<size_t>(c.out_channels) * geo.col_cols();
              for (int i = 0; i < n; ++i) {
                Im2Col(x.raw() + i * in_stride, geo, col.data());
                ConstMatrixMap<T> dy(g.raw() + i * out_stride, c.out_channels,
                                     geo.col_cols());
                dwm.noalias() += dy * col_m.transpose();
                for (int o = 0; o < c.out_channels; ++o) db[o] += dy.row(o).sum();
              }
              grads.params.Set(layer.name + ".weight", std::move(dw));
              if (c.bias) grads.params.Set(layer.name + ".bias", std::move(db));
              return Conv2dBackwardInput(g, w, x.shape(), c.stride, c.pad);
            },
            [&](const ReluLayer&) {
              BasicTensor<T> dx = g;
              for (size_t i = 0; i < dx.size(); ++i) {
                if (!(x[i] > T(0))) dx[i] = T(0);
              }
              return dx;
            },
            [&](const SigmoidLayer&) {
              BasicTensor<T> dx = g;
              for (size_t i = 0; i < dx.size(); ++i) dx[i] *= y[i] * (T(1) - y[i]);
              return dx;
            },
            [&](const SoftmaxLayer&) {
              BasicTensor<T> dx = g;
              const int k = x.dim(1);
              for (int i = 0; i < n; ++i) {
                const size_t off = static_cast<size_t>(i) * k;
                T dot = 0;
                for (int j = 0; j < k; ++j) dot += g[off + j] * y[off + j];
                for (int j = 0; j < k; ++j) dx[off + j] = y[off + j] * (g[off + j] - dot);
              }
              return dx;
            },
            [&](const FlattenLayer&) { return g.Reshaped(x.shape()); },
            [&](const Upsample2xLayer&) {
              const int ch = x.dim(1), h = x.dim(2), w = x.dim(3);
              BasicTensor<T> dx(x.shape());
              for (int p = 0; p < n * ch; ++p) {
                const T* src = g.raw() + static_cast<size_t>(p) * 4 * h * w;
                T* dst = dx.raw() + static_cast<size_t>(p) * h * w;
                for (int r = 0; r < 2 * h; ++r) {
                  for (int c = 0; c < 2 * w; ++c) {
                    dst[(r / 2) * w + c / 2] += src[static_cast<size_t>(r) * 2 * w + c];
                  }
                }
              }
              return dx;
            },
            [&](const ConcatConditionLayer& cc) {
              const int f = x.dim(1);
              BasicTensor<T> dx({n, f});
              BasicTensor<T> dc({n, cc.width});
              for (int i = 0; i < n; ++i) {
                const T* src = g.raw() + static_cast<size_t>(i) * (f + cc.width);
                std::copy_n(src, f, dx.raw() + static_cast<size_t>(i) * f);
                std::copy_n(src + f, cc.width,
                            dc.raw() + static_cast<size_t>(i) * cc.width);
              }
              grads.condition = std::move(dc);
              return dx;
            },
            [&](const UnflattenLayer&) { return g.Reshaped(x.shape()); },
        },
        layer.kind);
  }
  grads.input = std::move(g);
  return grads;
}

template <typename T>
BasicParameterSet<T> InitParameters(const NetworkSpec& spec, uint64_t seed) {
  BasicParameterSet<T> params;
  Rng rng(seed);
  for (const auto& [name, shape] : spec.ParameterShapes()) {
    BasicTensor<T> t(shape);
    if (shape.size() > 1) {
      const size_t receptive = shape.size() == 4 ? static_cast<size_t>(shape[2]) * shape[3] : 1;
      const double fan_in = static_cast<double>(shape[1]) * receptive;
      const double fan_out = static_cast<double>(shape[0]) * receptive;
      const double a = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-a, a);
      for (T& v : t.storage()) v = static_cast<T>(dist(rng));
    }
    params.Set(name, std::move(t));
  }
  return params;
}

template <typename T>
BasicParameterSet<T> ZeroParameters(const NetworkSpec& spec) {
  BasicParameterSet<T> params;
  for (const auto& [name, shape] : spec.ParameterShapes()) {
    params.Set(name, BasicTensor<T>(shape));
  }
  return params;
}

#define PRIVEX_INSTANTIATE_NETWORK(T)                                          \
  template ForwardResult<T> Forward(const NetworkSpec&,                        \
                                    const BasicParameterSet<T>&,               \
                                    const BasicTensor<T>&,                     \
                                    const BasicTensor<T>*);                    \
  template BasicTensor<T> Predict(const NetworkSpec&,                          \
                                  const BasicParameterSet<T>&,                 \
                                  const BasicTensor<T>&,                       \
                                  const BasicTensor<T>*);                      \
  template Gradients<T> Backward(const NetworkSpec&,                           \
                                 const BasicParameterSet<T>&, const Tape<T>&,  \
                                 const BasicTensor<T>&);                       \
  template BasicParameterSet<T> InitParameters<T>(const NetworkSpec&,          \
                                                  uint64_t);                   \
  template BasicParameterSet<T> ZeroParameters<T>(const NetworkSpec&);         \
  template BasicTensor<T> Conv2dForward(const BasicTensor<T>&,                 \
                                        const BasicTensor<T>&,                 \
                                        const BasicTensor<T>*, int, int);      \
  template BasicTensor<T> Conv2dBackwardInput(                                 \
      const BasicTensor<T>&, const BasicTensor<T>&, const Shape&, int, int);   \
  template BasicTensor<T> DenseForward(const BasicTensor<T>&,                  \
                                       const BasicTensor<T>&,                  \
                                       const BasicTensor<T>*);                 \
  template BasicTensor<T> DenseBackwardInput(const BasicTensor<T>&,            \
                                             const BasicTensor<T>&);

PRIVEX_INSTANTIATE_NETWORK(float)
PRIVEX_INSTANTIATE_NETWORK(double)

#undef PRIVEX_INSTANTIATE_NETWORK

}  // namespace privex
