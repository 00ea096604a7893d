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

#ifndef PRIVEX_PPRLVGAN_H_
#define PRIVEX_PPRLVGAN_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "privex/dataset.h"
#include "privex/image.h"
#include "privex/network.h"
#include "privex/optimizer.h"
#include "privex/privatize_classic.h"
#include "privex/tensor.h"

namespace privex {

// Diagonal Gaussian posterior q(f(I) | I) emitted by the encoder.
struct LatentCode {
  std::vector<double> mu;
  std::vector<double> logvar;
  std::optional<std::vector<double>> z;
};

// One-hot replacement identity c over the generator's training identities.
struct IdentityCode {
  int identity_label = 0;
  int index = 0;
  std::vector<float> one_hot;
};

IdentityCode MakeIdentityCode(std::span<const int> identities, int label);

struct GanArchitecture {
  int resolution = 64;  // must be divisible by 8
  int latent_dim = 32;
  std::array<int, 3> encoder_channels{8, 16, 32};
  std::array<int, 3> decoder_channels{32, 16, 8};
  std::array<int, 3> discriminator_channels{8, 16, 32};
};

// Conditional VAE generator. Encoder and decoder parameters share one set
// (layer names "enc_*" and "dec_*").
template <typename T>
struct BasicGenerator {
  GanArchitecture arch;
  std::vector<int> identities;  // ascending training identity labels
  NetworkSpec encoder;          // image -> (mu ++ logvar)
  NetworkSpec decoder;          // z, condition c -> image in [0,1]
  BasicParameterSet<T> params;

  int latent_dim() const { return arch.latent_dim; }
  int n_identities() const { return static_cast<int>(identities.size()); }
};

// Shared convolutional trunk with real/fake (sigmoid), identity (softmax) and
// task (2-way softmax) heads.
template <typename T>
struct BasicDiscriminator {
  GanArchitecture arch;
  std::vector<int> identities;
  NetworkSpec trunk;
  NetworkSpec real_fake;
  NetworkSpec identity;
  NetworkSpec task;
  BasicParameterSet<T> params;

  int n_identities() const { return static_cast<int>(identities.size()); }
};

using GeneratorState = BasicGenerator<float>;
using DiscriminatorState = BasicDiscriminator<float>;

template <typename T>
BasicGenerator<T> MakeGenerator(const GanArchitecture& arch,
                                std::vector<int> identities, uint64_t seed);
template <typename T>
BasicDiscriminator<T> MakeDiscriminator(const GanArchitecture& arch,
                                        std::vector<int> identities,
                                        uint64_t seed);

struct TrainingHyperparams {
  // Generator objective weights: realism, identity replacement, task
  // preservation, latent KL.
  double lambda_g1 = 0.5;
  double lambda_g2 = 0.5;
  double lambda_g3 = 0.5;
  double lambda_g4 = 0.002;
  double lambda_d1 = 1.0;
  double lambda_d2 = 1.0;
  double lambda_d3 = 1.0;
  GanArchitecture arch;
  int batch_size = 16;
  int epochs = 40;
  OptimizerConfig generator_optimizer{OptimizerConfig::Kind::kAdam, 2e-4, 0.5,
                                      0.999, 1e-8, std::nullopt};
  OptimizerConfig discriminator_optimizer{OptimizerConfig::Kind::kAdam, 2e-4,
                                          0.5, 0.999, 1e-8, std::nullopt};
  double log_clamp = 1e-7;
  // Replaces each log(1 - D(G)) term with -log D(G). Off by default.
  bool non_saturating = false;
  uint64_t seed = 0;

  void Validate() const;
};

// Mini-batch of real images with labels and replacement identities.
template <typename T>
struct GanBatch {
  BasicTensor<T> images;            // (N, 1, H, W)
  std::vector<int> identity;        // y^id labels
  std::vector<int> pathology;       // y^e labels
  std::vector<int> replacement;     // c labels
  uint64_t noise_seed = 0;          // reparameterization noise
};

template <typename T>
GanBatch<T> MakeBatch(std::span<const ImageSample* const> samples,
                      std::vector<int> replacement, uint64_t noise_seed);

template <typename T>
struct LossResult {
  double value = 0.0;
  BasicParameterSet<T> grads;
};

template <typename T>
LatentCode Encode(const BasicGenerator<T>& gen, const Image& image);

// z = mu + exp(0.5 logvar) * eps with eps ~ N(0, I) drawn from `seed`.
LatentCode SampleLatent(const LatentCode& code, uint64_t seed);
// Same with caller-supplied eps.
LatentCode SampleLatentWithNoise(const LatentCode& code,
                                 std::span<const double> noise);

// Standard-normal noise vector used by SampleLatent for `seed`.
std::vector<double> LatentNoise(int dim, uint64_t seed);

template <typename T>
Image Decode(const BasicGenerator<T>& gen, std::span<const double> z,
             const IdentityCode& code);

template <typename T>
Image Generate(const BasicGenerator<T>& gen, const Image& image,
               const IdentityCode& code, uint64_t seed);

// KL(N(mu, diag e^logvar) || N(0, I)). Throws std::invalid_argument on
// non-finite input.
double KlDivergence(const LatentCode& code);
// d KL / d mu and d KL / d logvar.
std::pair<std::vector<double>, std::vector<double>> KlGradient(
    const LatentCode& code);

// Batch mean of the discriminator objective (to maximize); grads are the
// ascent direction over discriminator parameters only.
template <typename T>
LossResult<T> DiscriminatorLoss(const BasicDiscriminator<T>& disc,
                                const BasicGenerator<T>& gen,
                                const GanBatch<T>& batch,
                                const TrainingHyperparams& hp);

// Batch mean of the generator loss (to minimize); grads cover generator
// parameters only, flowing through the reparameterized latent.
template <typename T>
LossResult<T> GeneratorLoss(const BasicDiscriminator<T>& disc,
                            const BasicGenerator<T>& gen,
                            const GanBatch<T>& batch,
                            const TrainingHyperparams& hp);

struct EpochStats {
  int epoch = 0;
  double discriminator_objective = 0.0;
  double generator_loss = 0.0;
  double val_real_fake_accuracy = 0.0;
};

struct GanTrainingResult {
  GeneratorState generator;
  DiscriminatorState discriminator;
  std::vector<EpochStats> history;
};

// Alternating optimization: one discriminator ascent step then one generator
// descent step per batch. Throws NumericalError after three consecutive
// non-finite batches.
GanTrainingResult TrainGan(const Dataset& train, const Dataset& val,
                           const TrainingHyperparams& hp);

// Fraction of val images with D1 > 0.5 plus generated images with D1 < 0.5.
double RealFakeAccuracy(const DiscriminatorState& disc,
                        const GeneratorState& gen, const Dataset& val,
                        uint64_t seed);

struct ReplacementPolicy {
  enum class Kind { kRandom, kSamePathology, kDifferentPathology, kFixed, kOriginal };
  Kind kind = Kind::kRandom;
  int fixed_identity = 0;
};

std::string PolicyName(const ReplacementPolicy& policy);
ReplacementPolicy ParsePolicy(const std::string& text);

// Candidate identities (ascending) for `sample`. An identity carries a
// pathology label when any of its training samples does.
std::vector<int> ReplacementPool(const ReplacementPolicy& policy,
                                 const ImageSample& sample, const Dataset& train);

IdentityCode ChooseReplacement(const ReplacementPolicy& policy,
                               const ImageSample& sample, const Dataset& train,
                               uint64_t seed);

// One generated image per sample. Sample i uses seed DeriveSeed(seed, i):
// its child stream 0 picks the identity, stream 1 drives generation.
std::vector<PrivatizedImage> PrivatizeSet(const GeneratorState& gen,
                                          const Dataset& dataset,
                                          const ReplacementPolicy& policy,
                                          const Dataset& train, uint64_t seed);

// Mean of n generated images: image 0 uses the original identity and `seed`;
// images j >= 1 use distinct policy-drawn identities and DeriveSeed(seed, j).
// replacement_identity records the first drawn identity.
PrivatizedImage AveragedPrivatize(const GeneratorState& gen,
                                  const ImageSample& sample, int n,
                                  const ReplacementPolicy& policy,
                                  const Dataset& train, uint64_t seed);

// Identities drawn by AveragedPrivatize for (sample, n, seed), original first.
std::vector<int> AveragedIdentities(int n, const ReplacementPolicy& policy,
                                    const ImageSample& sample,
                                    const Dataset& train, uint64_t seed);

std::vector<PrivatizedImage> AveragedPrivatizeSet(const GeneratorState& gen,
                                                  const Dataset& dataset, int n,
                                                  const ReplacementPolicy& policy,
                                                  const Dataset& train,
                                                  uint64_t seed);

// Writes <prefix>.psck ("gen." / "disc." tensors) and <prefix>.meta.
void SaveGan(const std::filesystem::path& prefix, const GeneratorState& gen,
             const DiscriminatorState& disc, uint64_t seed);

struct LoadedGan {
  GeneratorState generator;
  DiscriminatorState discriminator;
  uint64_t seed = 0;
};
LoadedGan LoadGan(const std::filesystem::path& prefix);

}  // namespace privex

#endif  // PRIVEX_PPRLVGAN_H_
