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

#include <cmath>
#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "privex/checkpoint.h"
#include "privex/error.h"
#include "privex/grad_check.h"
#include "privex/network.h"
#include "privex/optimizer.h"
#include "test_util.h"

namespace privex {
namespace {

using testing::RandomTensor;
using testing::TempDir;

// Loss = sum_i w_i * out_i for a fixed random w, so d loss / d out = w.
template <typename T>
LossClosure<T> LinearFunctionalLoss(const NetworkSpec& spec, const BasicTensor<T>& input,
                                    const BasicTensor<T>* condition, uint64_t seed) {
  return [=, &spec](const BasicParameterSet<T>& params, BasicParameterSet<T>* grads) {
    auto fwd = Forward(spec, params, input, condition);
    const BasicTensor<T> w = RandomTensor<T>(fwd.output.shape(), seed);
    double loss = 0.0;
    for (size_t i = 0; i < w.size(); ++i) loss += static_cast<double>(w[i]) * fwd.output[i];
    if (grads) *grads = Backward(spec, params, fwd.tape, w).params;
    return loss;
  };
}

TEST(ForwardTest, DenseIdentity) {
  const NetworkSpec spec = NetworkBuilder({2}).Dense(2, 2).Build();
  ParameterSet p = ZeroParameters<float>(spec);
  p.at("dense0.weight") = Tensor({2, 2}, {1, 0, 0, 1});
  const Tensor y = Predict(spec, p, Tensor({1, 2}, {3, 4}));
  EXPECT_EQ(y, Tensor({1, 2}, {3, 4}));
}

TEST(ForwardTest, Relu) {
  const NetworkSpec spec = NetworkBuilder({2}).Relu().Build();
  EXPECT_EQ(Predict(spec, ParameterSet(), Tensor({1, 2}, {-1, 2})), Tensor({1, 2}, {0, 2}));
}

TEST(ForwardTest, ConvOnesKernelOnImpulse) {
  const NetworkSpec spec = NetworkBuilder({1, 3, 3}).Conv2d(1, 1, 3, 1, 1).Build();
  ParameterSet p = ZeroParameters<float>(spec);
  p.at("conv2d0.weight").Fill(1.0f);
  Tensor x({1, 1, 3, 3});
  x[4] = 1.0f;
  const Tensor y = Predict(spec, p, x);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
  EXPECT_FLOAT_EQ(y[4], 1.0f);
}

// Direct-loop convolution oracle.
std::vector<double> NaiveConv(const BasicTensor<double>& x, const BasicTensor<double>& w,
                              const BasicTensor<double>& b, int stride, int pad) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int o = w.dim(0), k = w.dim(2);
  const int ho = (h + 2 * pad - k) / stride + 1, wo = (wd + 2 * pad - k) / stride + 1;
  std::vector<double> out;
  for (int ni = 0; ni < n; ++ni) {
    for (int oi = 0; oi < o; ++oi) {
      for (int r = 0; r < ho; ++r) {
        for (int q = 0; q < wo; ++q) {
          double s = b[oi];
          for (int ci = 0; ci < c; ++ci) {
            for (int dr = 0; dr < k; ++dr) {
              for (int dq = 0; dq < k; ++dq) {
                const int rr = r * stride - pad + dr, qq = q * stride - pad + dq;
                if (rr < 0 || rr >= h || qq < 0 || qq >= wd) continue;
                s += x[((ni * c + ci) * h + rr) * wd + qq] * w[((oi * c + ci) * k + dr) * k + dq];
              }
            }
          }
          out.push_back(s);
        }
      }
    }
  }
  return out;
}

TEST(ForwardTest, ConvMatchesDirectLoops) {
  for (int stride : {1, 2}) {
    for (int pad : {0, 1}) {
      const auto x = RandomTensor<double>({2, 3, 7, 6}, 1);
      const auto w = RandomTensor<double>({4, 3, 3, 3}, 2);
      const auto b = RandomTensor<double>({4}, 3);
      const auto y = Conv2dForward(x, w, &b, stride, pad);
      const auto expect = NaiveConv(x, w, b, stride, pad);
      ASSERT_EQ(y.size(), expect.size());
      for (size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], expect[i], 1e-12);
    }
  }
}

TEST(ForwardTest, SoftmaxIsADistribution) {
  const NetworkSpec spec = NetworkBuilder({5}).Softmax().Build();
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor y = Predict(spec, ParameterSet(), RandomTensor<float>({3, 5}, seed, 30.0));
    for (int r = 0; r < 3; ++r) {
      double sum = 0;
      for (int j = 0; j < 5; ++j) {
        EXPECT_GT(y[r * 5 + j], 0.0f);
        sum += y[r * 5 + j];
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

TEST(ForwardTest, UpsampleAndConcat) {
  const NetworkSpec up = NetworkBuilder({1, 2, 2}).Upsample2x().Build();
  const Tensor y = Predict(up, ParameterSet(), Tensor({1, 1, 2, 2}, {1, 2, 3, 4}));
  EXPECT_EQ(y, Tensor({1, 1, 4, 4}, {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4}));
  const NetworkSpec cat = NetworkBuilder({2}).ConcatCondition(3).Build();
  const Tensor cond({1, 3}, {0, 1, 0});
  EXPECT_EQ(Predict(cat, ParameterSet(), Tensor({1, 2}, {5, 6}), &cond),
            Tensor({1, 5}, {5, 6, 0, 1, 0}));
  EXPECT_THROW(Predict(cat, ParameterSet(), Tensor({1, 2}, {5, 6})), std::invalid_argument);
}

TEST(ForwardTest, IsPure) {
  const NetworkSpec spec =
      NetworkBuilder({1, 8, 8}).Conv2d(1, 4, 3, 2, 1).Relu().Flatten().Dense(64, 3).Build();
  const ParameterSet p = InitParameters<float>(spec, 5);
  const Tensor x = RandomTensor<float>({2, 1, 8, 8}, 6);
  EXPECT_EQ(Predict(spec, p, x), Predict(spec, p, x));
  EXPECT_EQ(Forward(spec, p, x).output, Predict(spec, p, x));
}

TEST(ForwardTest, ShapeErrorsNameTheLayer) {
  EXPECT_THROW(NetworkBuilder({4}).Dense(3, 2).Build(), std::invalid_argument);
  const NetworkSpec spec = NetworkBuilder({4}).Dense(4, 2).Build();
  ParameterSet p = InitParameters<float>(spec, 1);
  try {
    Predict(spec, p, Tensor({1, 5}));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("input"), std::string::npos) << e.what();
  }
  p.at("dense0.weight") = Tensor({2, 5});
  try {
    Predict(spec, p, Tensor({1, 4}));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("dense0"), std::string::npos) << e.what();
  }
}

TEST(NetworkSpecTest, ParameterCountAndInit) {
  const NetworkSpec spec =
      NetworkBuilder({1, 8, 8}).Conv2d(1, 4, 3, 2, 1).Relu().Flatten().Dense(64, 3, false).Build();
  EXPECT_EQ(spec.ParameterCount(), 4u * 9 + 4 + 64 * 3);
  const ParameterSet p = InitParameters<float>(spec, 9);
  EXPECT_EQ(p.ParameterCount(), spec.ParameterCount());
  EXPECT_EQ(p, InitParameters<float>(spec, 9));
  const double a = std::sqrt(6.0 / (64 + 3));
  for (float v : p.at("dense3.weight").data()) EXPECT_LE(std::abs(v), a);
  for (float v : p.at("conv2d0.bias").data()) EXPECT_EQ(v, 0.0f);
}

TEST(BackwardTest, DenseWeightGradientIsOuterProduct) {
  const NetworkSpec spec = NetworkBuilder({3}).Dense(3, 2, false).Build();
  const ParameterSet p = InitParameters<float>(spec, 1);
  const Tensor x({1, 3}, {1, 2, 3});
  const Tensor g({1, 2}, {0.5f, -2.0f});
  auto fwd = Forward(spec, p, x);
  const auto grads = Backward(spec, p, fwd.tape, g);
  const Tensor& dw = grads.params.at("dense0.weight");
  for (int o = 0; o < 2; ++o) {
    for (int i = 0; i < 3; ++i) EXPECT_FLOAT_EQ(dw[o * 3 + i], g[o] * x[i]);
  }
}

TEST(BackwardTest, ReluBlocksNegativeInputs) {
  const NetworkSpec spec = NetworkBuilder({4}).Relu().Build();
  const Tensor x({1, 4}, {-1, 2, -3, 4});
  auto fwd = Forward(spec, ParameterSet(), x);
  const auto grads = Backward(spec, ParameterSet(), fwd.tape, Tensor({1, 4}, {1, 1, 1, 1}));
  EXPECT_EQ(grads.input, Tensor({1, 4}, {0, 1, 0, 1}));
}

TEST(BackwardTest, StaleTapeFails) {
  const NetworkSpec a = NetworkBuilder({4}).Dense(4, 2).Build();
  const NetworkSpec b = NetworkBuilder({4}).Dense(4, 3).Build();
  const ParameterSet pa = InitParameters<float>(a, 1);
  auto fwd = Forward(a, pa, Tensor({1, 4}));
  EXPECT_THROW(Backward(b, InitParameters<float>(b, 1), fwd.tape, Tensor({1, 3})),
               std::invalid_argument);
  EXPECT_THROW(Backward(a, pa, Tape<float>(), Tensor({1, 2})), std::invalid_argument);
}

TEST(GradCheckTest, TwoLayerNetOnEightByEight) {
  const NetworkSpec spec =
      NetworkBuilder({1, 8, 8}).Conv2d(1, 3, 3, 1, 1).Relu().Flatten().Dense(192, 4).Build();
  const auto params = InitParameters<double>(spec, 3);
  const auto x = RandomTensor<double>({2, 1, 8, 8}, 4);
  const auto r = GradCheck<double>(params, LinearFunctionalLoss<double>(spec, x, nullptr, 5), 1e-3);
  EXPECT_LE(r.max_relative_error, 1e-3) << r.worst_parameter << "[" << r.worst_index << "]";
  EXPECT_EQ(r.entries_checked, params.ParameterCount());
}

// Random small architecture drawn from the full layer set.
NetworkSpec RandomNetwork(uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int c1 = 1 + rng() % 3, c2 = 1 + rng() % 3;
  const int head = 2 + rng() % 3;
  const int stride = 1 + static_cast<int>(rng() % 2);
  switch (seed % 4) {
    case 0:
      return NetworkBuilder({1, 6, 6})
          .Conv2d(1, c1, 3, stride, 1).Relu()
          .Flatten().Dense(c1 * (stride == 1 ? 36 : 9), head).Softmax()
          .Build();
    case 1:
      return NetworkBuilder({2, 4, 4})
          .Conv2d(2, c1, 3, 2, 1).Sigmoid()
          .Upsample2x().Conv2d(c1, c2, 3, 1, 1).Relu()
          .Flatten().Dense(c2 * 16, head)
          .Build();
    case 2:
      return NetworkBuilder({5})
          .ConcatCondition(3).Dense(8, 12).Relu()
          .Unflatten(3, 2, 2).Upsample2x().Conv2d(3, c2, 3, 1, 1).Sigmoid()
          .Build();
    default:
      return NetworkBuilder({6}).Dense(6, 5).Sigmoid().Dense(5, head).Softmax().Build();
  }
}

TEST(GradCheckTest, RandomNetworksPropertyOverSeeds) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const NetworkSpec spec = RandomNetwork(seed);
    const auto params = InitParameters<double>(spec, seed + 100);
    Shape in_shape = spec.input_shape();
    in_shape.insert(in_shape.begin(), 3);
    std::optional<BasicTensor<double>> cond;
    if (auto w = spec.condition_width()) {
      cond = BasicTensor<double>({3, *w});
      for (int i = 0; i < 3; ++i) (*cond)[i * *w + i % *w] = 1.0;
    }
    // Central differences with step 1e-3 are only meaningful away from relu
    // kinks; redraw inputs that land within 3e-3 of one.
    BasicTensor<double> x;
    for (uint64_t attempt = 0;; ++attempt) {
      x = RandomTensor<double>(in_shape, seed + 200 + 1000 * attempt);
      const auto fwd = Forward<double>(spec, params, x, cond ? &*cond : nullptr);
      if (testing::ReluMargin(spec, fwd.tape) > 3e-3) break;
      ASSERT_LT(attempt, 50u) << "seed " << seed;
    }
    const auto r = GradCheck<double>(
        params, LinearFunctionalLoss<double>(spec, x, cond ? &*cond : nullptr, seed + 300), 1e-3);
    EXPECT_LE(r.max_relative_error, 1e-3)
        << "seed " << seed << " " << r.worst_parameter << "[" << r.worst_index
        << "] analytic " << r.worst_analytic << " numeric " << r.worst_numeric;
  }
}

TEST(GradCheckTest, InputGradientMatchesDifferences) {
  const NetworkSpec spec =
      NetworkBuilder({1, 4, 4}).Conv2d(1, 2, 3, 2, 1).Sigmoid().Flatten().Dense(8, 2).Build();
  const auto params = InitParameters<double>(spec, 1);
  const auto x = RandomTensor<double>({1, 1, 4, 4}, 2);
  const auto w = RandomTensor<double>({1, 2}, 3);
  // Treat the input as a parameter set of its own.
  BasicParameterSet<double> in;
  in.Set("x", x);
  const auto r = GradCheck<double>(
      in,
      [&](const BasicParameterSet<double>& p, BasicParameterSet<double>* g) {
        auto fwd = Forward(spec, params, p.at("x"));
        double loss = 0;
        for (size_t i = 0; i < w.size(); ++i) loss += w[i] * fwd.output[i];
        if (g) g->Set("x", Backward(spec, params, fwd.tape, w).input);
        return loss;
      },
      1e-4);
  EXPECT_LE(r.max_relative_error, 1e-4);
}

TEST(GradCheckTest, QuadraticOneWeight) {
  const NetworkSpec spec = NetworkBuilder({1}).Dense(1, 1, false).Build();
  BasicParameterSet<double> p;
  p.Set("dense0.weight", BasicTensor<double>({1, 1}, {0.7}));
  const BasicTensor<double> x({1, 1}, {1.3});
  const auto r = GradCheck<double>(
      p,
      [&](const BasicParameterSet<double>& q, BasicParameterSet<double>* g) {
        auto fwd = Forward(spec, q, x);
        const double y = fwd.output[0];
        if (g) *g = Backward(spec, q, fwd.tape, BasicTensor<double>({1, 1}, {2 * y})).params;
        return y * y;
      },
      1e-3);
  EXPECT_LE(r.max_relative_error, 1e-5);
}

TEST(GradCheckTest, DetectsWrongGradients) {
  // f(w) = s * w^2 / 2 with an analytic gradient off by 1%.
  for (double s : {1.0, 1e-3}) {
    BasicParameterSet<double> p;
    p.Set("w", BasicTensor<double>({1}, {0.5}));
    const auto r = GradCheck<double>(
        p,
        [&](const BasicParameterSet<double>& q, BasicParameterSet<double>* g) {
          const double w = q.at("w")[0];
          if (g) g->Set("w", BasicTensor<double>({1}, {1.01 * s * w}));
          return s * w * w / 2;
        },
        1e-3);
    // True gradient s/2; below the 1e-4 floor the error is scaled by it.
    const double expected = 0.01 * s / 2 / std::max(1.01 * s / 2, 1e-4);
    EXPECT_NEAR(r.max_relative_error, expected, 1e-6 * std::max(expected, 1e-3)) << s;
    EXPECT_GT(r.max_relative_error, 1e-3) << s;
  }
}

TEST(GradCheckTest, ZeroNetwork) {
  const NetworkSpec spec = NetworkBuilder({3}).Dense(3, 2).Build();
  const auto p = ZeroParameters<double>(spec);
  const BasicTensor<double> x({1, 3});
  BasicParameterSet<double> grads;
  const auto loss = [&](const BasicParameterSet<double>& q, BasicParameterSet<double>* g) {
    auto fwd = Forward(spec, q, x);
    if (g) *g = Backward(spec, q, fwd.tape, BasicTensor<double>({1, 2}, 1.0)).params;
    return fwd.output[0] + fwd.output[1];
  };
  loss(p, &grads);
  for (double v : grads.at("dense0.weight").data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(GradCheck<double>(p, loss, 1e-3).max_relative_error, 0.0);
}

TEST(GradCheckTest, SigmoidBinaryCrossEntropy) {
  const NetworkSpec spec = NetworkBuilder({4}).Dense(4, 1).Sigmoid().Build();
  const auto p = InitParameters<double>(spec, 8);
  const auto x = RandomTensor<double>({5, 4}, 9);
  const std::vector<int> y = {1, 0, 0, 1, 1};
  const auto r = GradCheck<double>(
      p,
      [&](const BasicParameterSet<double>& q, BasicParameterSet<double>* g) {
        auto fwd = Forward(spec, q, x);
        BasicTensor<double> dout({5, 1});
        double loss = 0;
        for (int i = 0; i < 5; ++i) {
          const double s = fwd.output[i];
          loss -= y[i] ? std::log(s) : std::log(1 - s);
          dout[i] = y[i] ? -1 / s : 1 / (1 - s);
        }
        if (g) *g = Backward(spec, q, fwd.tape, dout).params;
        return loss;
      },
      1e-3);
  EXPECT_LE(r.max_relative_error, 1e-3);
}

TEST(GradCheckTest, NonFiniteLossFails) {
  BasicParameterSet<double> p;
  p.Set("w", BasicTensor<double>({1}, {1.0}));
  EXPECT_THROW(GradCheck<double>(
                   p,
                   [](const BasicParameterSet<double>&, BasicParameterSet<double>* g) {
                     if (g) g->Set("w", BasicTensor<double>({1}));
                     return std::nan("");
                   },
                   1e-3),
               NumericalError);
}

TEST(OptimizerTest, SgdStep) {
  ParameterSet p, g;
  p.Set("w", Tensor({1}, {0.5f}));
  g.Set("w", Tensor({1}, {1.0f}));
  Optimizer<float> opt({OptimizerConfig::Kind::kSgd, 0.1});
  opt.Step(p, g);
  EXPECT_FLOAT_EQ(p.at("w")[0], 0.4f);
}

TEST(OptimizerTest, ZeroGradientLeavesParameters) {
  for (auto kind : {OptimizerConfig::Kind::kSgd, OptimizerConfig::Kind::kAdam}) {
    ParameterSet p;
    p.Set("w", RandomTensor<float>({3, 3}, 1));
    const ParameterSet before = p;
    Optimizer<float> opt({kind, 0.01});
    for (int i = 0; i < 3; ++i) opt.Step(p, p.ZerosLike());
    EXPECT_EQ(p, before);
  }
}

TEST(OptimizerTest, AdamFirstStep) {
  ParameterSet p, g;
  p.Set("w", Tensor({1}, {0.0f}));
  g.Set("w", Tensor({1}, {0.5f}));
  Optimizer<float> opt({OptimizerConfig::Kind::kAdam, 0.001, 0.9, 0.999, 1e-8});
  opt.Step(p, g);
  // m_hat = 0.5, v_hat = 0.25: step = lr * 0.5 / (0.5 + 1e-8).
  const double expect = -0.001 * 0.5 / (0.5 + 1e-8);
  EXPECT_NEAR(p.at("w")[0], expect, 1e-9);
}

TEST(OptimizerTest, ClipNormAndValidation) {
  ParameterSet p, g;
  p.Set("w", Tensor({2}, {0, 0}));
  g.Set("w", Tensor({2}, {3, 4}));
  OptimizerConfig cfg{OptimizerConfig::Kind::kSgd, 1.0};
  cfg.clip_norm = 1.0;
  Optimizer<float> opt(cfg);
  opt.Step(p, g);
  EXPECT_NEAR(p.at("w")[0], -0.6f, 1e-6);
  EXPECT_NEAR(p.at("w")[1], -0.8f, 1e-6);
  EXPECT_THROW(Optimizer<float>({OptimizerConfig::Kind::kAdam, 0.0}), std::invalid_argument);
  EXPECT_THROW(Optimizer<float>({OptimizerConfig::Kind::kAdam, 0.1, 1.0}), std::invalid_argument);
  ParameterSet bad;
  bad.Set("w", Tensor({3}));
  EXPECT_THROW(opt.Step(p, bad), std::invalid_argument);
}

TEST(CheckpointTest, RoundTripIsByteIdentical) {
  TempDir dir;
  const NetworkSpec spec =
      NetworkBuilder({1, 8, 8}).Conv2d(1, 4, 3, 2, 1).Relu().Flatten().Dense(64, 3).Build();
  const ParameterSet p = InitParameters<float>(spec, 2);
  SaveCheckpoint(dir.path() / "a.psck", p);
  const ParameterSet q = LoadCheckpoint(dir.path() / "a.psck");
  EXPECT_EQ(p, q);
  SaveCheckpoint(dir.path() / "b.psck", q);
  EXPECT_EQ(testing::ReadFile(dir.path() / "a.psck"), testing::ReadFile(dir.path() / "b.psck"));
}

TEST(CheckpointTest, LayoutMatchesFormat) {
  ParameterSet p;
  p.Set("ab", Tensor({2}, {1.0f, -2.0f}));
  const auto bytes = EncodeCheckpoint(p);
  // magic 4 + version 2 + count 4 + name len 2 + name 2 + rank 1 + dim 4 + data 8
  ASSERT_EQ(bytes.size(), 27u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PSCK");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[6], 1);
  EXPECT_EQ(bytes[10], 2);
  EXPECT_EQ(bytes[12], 'a');
  EXPECT_EQ(bytes[14], 1);
  EXPECT_EQ(bytes[15], 2);
  float v;
  std::memcpy(&v, bytes.data() + 23, 4);
  EXPECT_EQ(v, -2.0f);
}

TEST(CheckpointTest, CorruptAndMissingFilesFail) {
  TempDir dir;
  EXPECT_THROW(LoadCheckpoint(dir.path() / "none.psck"), MissingArtifactError);
  std::vector<uint8_t> bytes = EncodeCheckpoint(ParameterSet());
  bytes[0] = 'X';
  EXPECT_THROW(DecodeCheckpoint(bytes), LoadError);
  ParameterSet p;
  p.Set("w", Tensor({4}));
  bytes = EncodeCheckpoint(p);
  bytes.pop_back();
  EXPECT_THROW(DecodeCheckpoint(bytes), LoadError);
}

TEST(CheckpointTest, MetadataRoundTrip) {
  TempDir dir;
  SaveMetadata(dir.path() / "m.meta", {{"b", "2"}, {"a", "x y"}});
  const auto m = LoadMetadata(dir.path() / "m.meta");
  EXPECT_EQ(m.at("a"), "x y");
  EXPECT_EQ(m.at("b"), "2");
}

}  // namespace
}  // namespace privex
