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
#include <map>

#include <gtest/gtest.h>

#include "privex/error.h"
#include "privex/grad_check.h"
#include "privex/pprlvgan.h"
#include "privex/rng.h"
#include "test_util.h"

namespace privex {
namespace {

using testing::RandomDataset;
using testing::RandomImage;
using testing::TempDir;

GanArchitecture Mini() {
  GanArchitecture a;
  a.resolution = 8;
  a.latent_dim = 4;
  a.encoder_channels = {2, 3, 4};
  a.decoder_channels = {4, 3, 2};
  a.discriminator_channels = {2, 3, 4};
  return a;
}

template <typename T>
GanBatch<T> MiniBatch(const Dataset& d, const std::vector<int>& replacement, uint64_t seed) {
  std::vector<const ImageSample*> ptrs;
  for (size_t i = 0; i < replacement.size(); ++i) ptrs.push_back(&d[i]);
  return MakeBatch<T>(ptrs, replacement, seed);
}

// Zeroes every tensor whose name starts with `prefix`.
template <typename T>
void ZeroPrefix(BasicParameterSet<T>& params, const std::string& prefix) {
  for (auto& [name, t] : params) {
    if (name.rfind(prefix, 0) == 0) t.Fill(T(0));
  }
}

TrainingHyperparams OnlyWeights(double g1, double g2, double g3, double g4, double d1,
                                double d2, double d3) {
  TrainingHyperparams hp;
  hp.arch = Mini();
  hp.lambda_g1 = g1;
  hp.lambda_g2 = g2;
  hp.lambda_g3 = g3;
  hp.lambda_g4 = g4;
  hp.lambda_d1 = d1;
  hp.lambda_d2 = d2;
  hp.lambda_d3 = d3;
  return hp;
}

class GanTest : public ::testing::Test {
 protected:
  GanTest() : data_(RandomDataset(3, 3, 8, 1)) {}
  Dataset data_;
};

TEST_F(GanTest, ArchitectureShapes) {
  const auto gen = MakeGenerator<float>(Mini(), data_.identities(), 1);
  const auto disc = MakeDiscriminator<float>(Mini(), data_.identities(), 2);
  EXPECT_EQ(gen.decoder.condition_width(), 3);
  EXPECT_EQ(gen.encoder.output_shape(), Shape{8});
  EXPECT_EQ(gen.decoder.output_shape(), (Shape{1, 8, 8}));
  EXPECT_EQ(disc.identity.output_shape(), Shape{3});
  EXPECT_EQ(disc.task.output_shape(), Shape{2});
  EXPECT_EQ(disc.real_fake.output_shape(), Shape{1});
  EXPECT_THROW(MakeGenerator<float>(GanArchitecture{12}, {0, 1}, 1), std::invalid_argument);
}

TEST_F(GanTest, EncodeContracts) {
  auto gen = MakeGenerator<float>(Mini(), data_.identities(), 1);
  ZeroPrefix(gen.params, "enc_");
  const LatentCode zero = Encode(gen, data_[0].pixels);
  EXPECT_EQ(zero.mu, std::vector<double>(4, 0.0));
  EXPECT_EQ(zero.logvar, std::vector<double>(4, 0.0));
  EXPECT_FALSE(zero.z.has_value());
  const auto trained = MakeGenerator<float>(Mini(), data_.identities(), 1);
  const LatentCode a = Encode(trained, data_[1].pixels);
  const LatentCode b = Encode(trained, data_[1].pixels);
  EXPECT_EQ(a.mu, b.mu);
  EXPECT_EQ(a.logvar, b.logvar);
  EXPECT_EQ(a.mu.size(), 4u);
  EXPECT_THROW(Encode(trained, Image(16, 16)), std::invalid_argument);
}

TEST(LatentTest, Reparameterization) {
  LatentCode code{{0.3, -1.2}, {0.4, -0.7}, std::nullopt};
  const std::vector<double> zero = {0.0, 0.0};
  EXPECT_EQ(*SampleLatentWithNoise(code, zero).z, code.mu);
  LatentCode unit{{0.0, 0.0}, {0.0, 0.0}, std::nullopt};
  const std::vector<double> e = {1.5, -0.25};
  EXPECT_EQ(*SampleLatentWithNoise(unit, e).z, e);
  EXPECT_EQ(*SampleLatent(code, 5).z, *SampleLatent(code, 5).z);
}

TEST(LatentTest, SampleVarianceMatchesExpLogvar) {
  LatentCode code{{0.5}, {0.8}, std::nullopt};
  const int n = 10000;
  double sum = 0, sq = 0;
  for (int s = 0; s < n; ++s) {
    const double z = (*SampleLatent(code, static_cast<uint64_t>(s)).z)[0];
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_NEAR(var, std::exp(0.8), 0.05 * std::exp(0.8));
}

TEST(KlTest, ClosedFormValues) {
  EXPECT_EQ(KlDivergence({{0.0, 0.0}, {0.0, 0.0}, std::nullopt}), 0.0);
  // Numerical integration of q log(q / p) for q = N(1, 1), p = N(0, 1).
  double integral = 0;
  const double h = 1e-3;
  for (double x = -12; x < 14; x += h) {
    const double q = std::exp(-0.5 * (x - 1) * (x - 1)) / std::sqrt(2 * M_PI);
    const double p = std::exp(-0.5 * x * x) / std::sqrt(2 * M_PI);
    integral += q * std::log(q / p) * h;
  }
  EXPECT_NEAR(KlDivergence({{1.0}, {0.0}, std::nullopt}), integral, 1e-6);
  EXPECT_NEAR(integral, 0.5, 1e-6);
  EXPECT_THROW(KlDivergence({{NAN}, {0.0}, std::nullopt}), std::invalid_argument);
}

TEST(KlTest, GradientMatchesDifferences) {
  Rng rng(3);
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    LatentCode c{{g(rng), g(rng), g(rng)}, {g(rng), g(rng), g(rng)}, std::nullopt};
    const auto [dmu, dlv] = KlGradient(c);
    const double eps = 1e-5;
    for (size_t d = 0; d < 3; ++d) {
      for (int which = 0; which < 2; ++which) {
        LatentCode up = c, down = c;
        (which ? up.logvar : up.mu)[d] += eps;
        (which ? down.logvar : down.mu)[d] -= eps;
        const double numeric = (KlDivergence(up) - KlDivergence(down)) / (2 * eps);
        const double analytic = which ? dlv[d] : dmu[d];
        EXPECT_LE(std::abs(analytic - numeric) / std::max(1e-8, std::abs(numeric)), 1e-4);
      }
    }
    EXPECT_GE(KlDivergence(c), 0.0);
  }
}

TEST_F(GanTest, GenerateContracts) {
  const auto gen = MakeGenerator<float>(Mini(), data_.identities(), 4);
  const IdentityCode c = MakeIdentityCode(gen.identities, data_.identities()[2]);
  EXPECT_EQ(c.one_hot, (std::vector<float>{0, 0, 1}));
  const Image a = Generate(gen, data_[0].pixels, c, 9);
  EXPECT_EQ(a.rows(), 8);
  EXPECT_EQ(a.cols(), 8);
  for (float p : a.pixels()) {
    EXPECT_GE(p, 0.0f);
    EXPECT_LE(p, 1.0f);
  }
  EXPECT_EQ(a, Generate(gen, data_[0].pixels, c, 9));
  EXPECT_THROW(MakeIdentityCode(gen.identities, 77), std::invalid_argument);
}

TEST_F(GanTest, DiscriminatorObjectiveAtHalf) {
  const auto gen = MakeGenerator<float>(Mini(), data_.identities(), 1);
  auto disc = MakeDiscriminator<float>(Mini(), data_.identities(), 2);
  ZeroPrefix(disc.params, "rf_");
  const auto batch = MiniBatch<float>(data_, {0, 1, 2, 0}, 3);
  const auto r = DiscriminatorLoss(disc, gen, batch, OnlyWeights(1, 1, 1, 1, 1, 0, 0));
  EXPECT_NEAR(r.value, 2 * std::log(0.5), 1e-6);
}

TEST_F(GanTest, DiscriminatorObjectiveWhenConfident) {
  // Real images are all ones; the generator renders near-zero images.
  std::vector<ImageSample> samples;
  for (int i = 0; i < 3; ++i) {
    samples.push_back(testing::MakeSample("o" + std::to_string(i), Image(8, 8, 1.0f), 0, 1));
  }
  samples.push_back(testing::MakeSample("other", Image(8, 8, 1.0f), 1, 0));
  const Dataset ones(samples);
  auto gen = MakeGenerator<float>(Mini(), ones.identities(), 1);
  ZeroPrefix(gen.params, "dec_");
  ASSERT_TRUE(gen.params.Contains("dec_conv2d11.bias"));  // last decoder conv
  gen.params.at("dec_conv2d11.bias").Fill(-60.0f);
  auto disc = MakeDiscriminator<float>(Mini(), ones.identities(), 2);
  for (auto& [name, t] : disc.params) {
    if (name.rfind("trunk_", 0) == 0 && name.ends_with(".weight")) t.Fill(0.5f);
    if (name.rfind("trunk_", 0) == 0 && name.ends_with(".bias")) t.Fill(0.0f);
  }
  ZeroPrefix(disc.params, "rf_");
  ZeroPrefix(disc.params, "id_");
  ZeroPrefix(disc.params, "task_");
  disc.params.at("rf_dense0.weight").Fill(50.0f);
  disc.params.at("rf_dense0.bias").Fill(-20.0f);
  disc.params.at("id_dense0.bias")[0] = 60.0f;
  disc.params.at("task_dense0.bias")[1] = 60.0f;
  const auto batch = MiniBatch<float>(ones, {1, 1, 1}, 3);
  const auto hp = OnlyWeights(1, 1, 1, 1, 1, 1, 1);
  const auto r = DiscriminatorLoss(disc, gen, batch, hp);
  EXPECT_LE(r.value, 0.0);
  EXPECT_GT(r.value, -1e-5);
}

TEST_F(GanTest, DiscriminatorClampKeepsObjectiveFinite) {
  const auto gen = MakeGenerator<float>(Mini(), data_.identities(), 1);
  auto disc = MakeDiscriminator<float>(Mini(), data_.identities(), 2);
  ZeroPrefix(disc.params, "rf_");
  disc.params.at("rf_dense0.bias").Fill(-1e4f);  // D1 == 0 exactly
  const auto batch = MiniBatch<float>(data_, {1, 2}, 3);
  const auto r = DiscriminatorLoss(disc, gen, batch, OnlyWeights(1, 1, 1, 1, 1, 1, 1));
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_LE(r.value, std::log(1e-7) + 1e-6 + 0.0);
  EXPECT_THROW(DiscriminatorLoss(disc, gen, GanBatch<float>{}, TrainingHyperparams{}),
               std::invalid_argument);
  EXPECT_THROW(GeneratorLoss(disc, gen, GanBatch<float>{}, TrainingHyperparams{}),
               std::invalid_argument);
}

TEST_F(GanTest, GeneratorLossSpecialCases) {
  auto gen = MakeGenerator<float>(Mini(), data_.identities(), 1);
  auto disc = MakeDiscriminator<float>(Mini(), data_.identities(), 2);
  const auto batch = MiniBatch<float>(data_, {1, 2, 0}, 3);

  const auto none = GeneratorLoss(disc, gen, batch, OnlyWeights(0, 0, 0, 0, 1, 1, 1));
  EXPECT_EQ(none.value, 0.0);
  for (const auto& [name, t] : none.grads) {
    for (float v : t.data()) EXPECT_EQ(v, 0.0f) << name;
  }

  auto zero_enc = gen;
  ZeroPrefix(zero_enc.params, "enc_");
  EXPECT_EQ(GeneratorLoss(disc, zero_enc, batch, OnlyWeights(0, 0, 0, 1, 1, 1, 1)).value, 0.0);

  ZeroPrefix(disc.params, "rf_");
  auto hp = OnlyWeights(1, 0, 0, 0, 1, 1, 1);
  hp.non_saturating = false;
  EXPECT_NEAR(GeneratorLoss(disc, gen, batch, hp).value, std::log(0.5), 1e-6);
  hp.non_saturating = true;
  EXPECT_NEAR(GeneratorLoss(disc, gen, batch, hp).value, -std::log(0.5), 1e-6);
}

TEST_F(GanTest, GradientsMatchFiniteDifferences) {
  // Zero-initialized biases behind dead channels put units exactly on a relu
  // kink; jitter them and keep the first point where every unit is clear of
  // its kink by more than the finite-difference step can move it.
  const auto batch = MiniBatch<double>(data_, {2, 0}, 7);
  BasicGenerator<double> gen;
  BasicDiscriminator<double> disc;
  for (uint64_t attempt = 0;; ++attempt) {
    gen = MakeGenerator<double>(Mini(), data_.identities(), 5);
    disc = MakeDiscriminator<double>(Mini(), data_.identities(), 6);
    testing::JitterBiases(gen.params, 2 * attempt);
    testing::JitterBiases(disc.params, 2 * attempt + 1);
    if (testing::GanReluMargin(gen, disc, batch) > 3e-3) break;
    ASSERT_LT(attempt, 200u);
  }
  for (bool ns : {false, true}) {
    TrainingHyperparams hp;
    hp.arch = Mini();
    hp.lambda_g4 = 0.3;  // exercise the KL path at a visible scale
    hp.non_saturating = ns;
    const auto d_check = GradCheck<double>(
        disc.params,
        [&](const BasicParameterSet<double>& p, BasicParameterSet<double>* g) {
          auto d = disc;
          d.params = p;
          auto r = DiscriminatorLoss(d, gen, batch, hp);
          if (g) *g = r.grads;
          return r.value;
        },
        1e-3);
    EXPECT_LE(d_check.max_relative_error, 1e-3) << d_check.worst_parameter;
    const auto g_check = GradCheck<double>(
        gen.params,
        [&](const BasicParameterSet<double>& p, BasicParameterSet<double>* g) {
          auto gg = gen;
          gg.params = p;
          auto r = GeneratorLoss(disc, gg, batch, hp);
          if (g) *g = r.grads;
          return r.value;
        },
        1e-3);
    EXPECT_LE(g_check.max_relative_error, 1e-3) << g_check.worst_parameter;
  }
}

TEST_F(GanTest, LambdaScalingIsLinear) {
  const auto gen = MakeGenerator<double>(Mini(), data_.identities(), 5);
  const auto disc = MakeDiscriminator<double>(Mini(), data_.identities(), 6);
  const auto batch = MiniBatch<double>(data_, {2, 0, 1}, 7);
  TrainingHyperparams hp;
  hp.arch = Mini();
  TrainingHyperparams scaled = hp;
  scaled.lambda_g1 *= 3.5;
  scaled.lambda_g2 *= 3.5;
  scaled.lambda_g3 *= 3.5;
  scaled.lambda_g4 *= 3.5;
  const auto a = GeneratorLoss(disc, gen, batch, hp);
  const auto b = GeneratorLoss(disc, gen, batch, scaled);
  EXPECT_NEAR(b.value, 3.5 * a.value, 1e-9 * std::abs(b.value));
  double dot = 0, na = 0, nb = 0;
  for (const auto& [name, t] : a.grads) {
    const auto& u = b.grads.at(name);
    for (size_t i = 0; i < t.size(); ++i) {
      dot += t[i] * u[i];
      na += t[i] * t[i];
      nb += u[i] * u[i];
    }
  }
  EXPECT_LE(1.0 - dot / std::sqrt(na * nb), 1e-5);
}

TEST_F(GanTest, TrainingContracts) {
  TrainingHyperparams hp;
  hp.arch = Mini();
  hp.epochs = 0;
  hp.seed = 3;
  const auto a = TrainGan(data_, data_, hp);
  EXPECT_TRUE(a.history.empty());
  EXPECT_EQ(a.generator.params, TrainGan(data_, data_, hp).generator.params);

  hp.epochs = 2;
  hp.batch_size = 4;
  const auto b = TrainGan(data_, data_, hp);
  const auto c = TrainGan(data_, data_, hp);
  EXPECT_EQ(b.history.size(), 2u);
  EXPECT_EQ(b.generator.params, c.generator.params);
  EXPECT_EQ(b.discriminator.params, c.discriminator.params);
  EXPECT_FALSE(b.generator.params == a.generator.params);

  const Dataset stranger = RandomDataset(5, 1, 8, 2);
  EXPECT_THROW(TrainGan(data_, stranger, hp), std::invalid_argument);
  hp.batch_size = 0;
  EXPECT_THROW(TrainGan(data_, data_, hp), std::invalid_argument);
}

TEST(ReplacementTest, PolicyPools) {
  const Dataset train = RandomDataset(6, 2, 8, 3);  // pathology = identity % 2
  const ImageSample& s = train[4];                 // identity 2, pathology 0
  EXPECT_EQ(ChooseReplacement({ReplacementPolicy::Kind::kOriginal}, s, train, 1).identity_label, 2);
  for (uint64_t seed = 0; seed < 50; ++seed) {
    const int same = ChooseReplacement({ReplacementPolicy::Kind::kSamePathology}, s, train, seed)
                         .identity_label;
    EXPECT_NE(same, 2);
    EXPECT_EQ(same % 2, 0);
    const int diff =
        ChooseReplacement({ReplacementPolicy::Kind::kDifferentPathology}, s, train, seed)
            .identity_label;
    EXPECT_EQ(diff % 2, 1);
  }
  EXPECT_EQ(ChooseReplacement({ReplacementPolicy::Kind::kFixed, 5}, s, train, 1).identity_label, 5);
  EXPECT_THROW(ChooseReplacement({ReplacementPolicy::Kind::kFixed, 50}, s, train, 1),
               std::invalid_argument);
  const Dataset lonely = RandomDataset(3, 1, 8, 4);  // a single pathology-1 identity
  EXPECT_THROW(ChooseReplacement({ReplacementPolicy::Kind::kSamePathology}, lonely[1], lonely, 1),
               std::invalid_argument);
  EXPECT_EQ(ParsePolicy(PolicyName({ReplacementPolicy::Kind::kFixed, 4})).fixed_identity, 4);
  EXPECT_THROW(ParsePolicy("sideways"), std::invalid_argument);
}

TEST(ReplacementTest, RandomPolicyIsUniform) {
  const Dataset train = RandomDataset(20, 1, 8, 5);
  std::map<int, int> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    counts[ChooseReplacement({ReplacementPolicy::Kind::kRandom}, train[0], train, i).identity_label]++;
  }
  EXPECT_EQ(counts.count(0), 0u);
  EXPECT_EQ(counts.size(), 19u);
  for (const auto& [id, c] : counts) {
    EXPECT_NEAR(c / static_cast<double>(n), 1.0 / 19, 0.2 / 19) << id;
  }
}

TEST(PrivatizeTest, SetContracts) {
  const Dataset train = RandomDataset(4, 3, 8, 6);
  const auto gen = MakeGenerator<float>(Mini(), train.identities(), 7);
  const auto out = PrivatizeSet(gen, train, {ReplacementPolicy::Kind::kRandom}, train, 11);
  ASSERT_EQ(out.size(), train.size());
  const auto again = PrivatizeSet(gen, train, {ReplacementPolicy::Kind::kRandom}, train, 11);
  for (size_t i = 0; i < out.size(); ++i) {
    EXPECT_NE(*out[i].replacement_identity, train[i].identity);
    EXPECT_EQ(out[i].method, PrivatizationMethod::kPprlVgan);
    EXPECT_EQ(out[i].source_ids, std::vector<std::string>{train[i].id});
    EXPECT_EQ(out[i].pixels, again[i].pixels);
    EXPECT_EQ(*out[i].replacement_identity, *again[i].replacement_identity);
  }
}

TEST(PrivatizeTest, AveragedMatchesIndependentMean) {
  const Dataset train = RandomDataset(8, 2, 8, 8);
  const auto gen = MakeGenerator<float>(Mini(), train.identities(), 9);
  const ReplacementPolicy random{ReplacementPolicy::Kind::kRandom};
  const ImageSample& s = train[3];
  const uint64_t seed = 21;

  const auto one = AveragedPrivatize(gen, s, 1, random, train, seed);
  EXPECT_EQ(one.pixels, Generate(gen, s.pixels, MakeIdentityCode(gen.identities, s.identity), seed));

  const int n = 6;
  const auto avg = AveragedPrivatize(gen, s, n, random, train, seed);
  const auto ids = AveragedIdentities(n, random, s, train, seed);
  ASSERT_EQ(ids.size(), 6u);
  EXPECT_EQ(ids[0], s.identity);
  EXPECT_EQ(std::set<int>(ids.begin(), ids.end()).size(), 6u);
  std::vector<Image> parts;
  for (int j = 0; j < n; ++j) {
    parts.push_back(Generate(gen, s.pixels, MakeIdentityCode(gen.identities, ids[j]),
                             j == 0 ? seed : DeriveSeed(seed, static_cast<uint64_t>(j))));
  }
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      double mean = 0;
      for (const Image& p : parts) mean += p.at(r, c);
      EXPECT_NEAR(avg.pixels.at(r, c), mean / n, 1e-6);
    }
  }
  EXPECT_EQ(avg.source_identities.size(), 6u);
  EXPECT_EQ(*avg.replacement_identity, ids[1]);
  EXPECT_TRUE(VerifyKAnonymity({avg}, 6).pass);
  EXPECT_FALSE(VerifyKAnonymity({avg}, 7).pass);
  EXPECT_THROW(AveragedPrivatize(gen, s, 9, random, train, seed), std::invalid_argument);
}

TEST(PrivatizeTest, DegenerateGeneratorAveragesToItself) {
  const Dataset train = RandomDataset(6, 1, 8, 10);
  auto gen = MakeGenerator<float>(Mini(), train.identities(), 11);
  ZeroPrefix(gen.params, "dec_");  // output = sigmoid(0) everywhere
  const auto avg =
      AveragedPrivatize(gen, train[0], 4, {ReplacementPolicy::Kind::kRandom}, train, 3);
  for (float p : avg.pixels.pixels()) EXPECT_FLOAT_EQ(p, 0.5f);
}

TEST(PersistenceTest, SaveLoadRoundTrip) {
  TempDir dir;
  const std::vector<int> ids = {2, 5, 9};
  const auto gen = MakeGenerator<float>(Mini(), ids, 1);
  const auto disc = MakeDiscriminator<float>(Mini(), ids, 2);
  SaveGan(dir.path() / "g", gen, disc, 77);
  const LoadedGan back = LoadGan(dir.path() / "g");
  EXPECT_EQ(back.generator.params, gen.params);
  EXPECT_EQ(back.discriminator.params, disc.params);
  EXPECT_EQ(back.generator.identities, ids);
  EXPECT_EQ(back.seed, 77u);
  const auto meta = testing::ReadFile(dir.path() / "g.meta");
  for (const char* key : {"n_identities=3", "latent_dim=4", "resolution=8", "seed=77"}) {
    EXPECT_NE(meta.find(key), std::string::npos) << key;
  }
  EXPECT_THROW(LoadGan(dir.path() / "missing"), MissingArtifactError);
}

}  // namespace
}  // namespace privex
