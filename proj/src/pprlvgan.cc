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

#include "privex/pprlvgan.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "privex/checkpoint.h"
#include "privex/error.h"
#include "privex/rng.h"

namespace privex {

namespace {

int IdentityIndex(std::span<const int> identities, int label) {
  auto it = std::lower_bound(identities.begin(), identities.end(), label);
  if (it == identities.end() || *it != label) {
    throw std::invalid_argument("identity " + std::to_string(label) +
                                " is not among the training identities");
  }
  return static_cast<int>(it - identities.begin());
}

void CheckArchitecture(const GanArchitecture& arch) {
  if (arch.resolution < 8 || arch.resolution % 8 != 0) {
    throw std::invalid_argument("GAN resolution must be a positive multiple of 8");
  }
  if (arch.latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
}

}  // namespace

IdentityCode MakeIdentityCode(std::span<const int> identities, int label) {
  IdentityCode code;
  code.identity_label = label;
  code.index = IdentityIndex(identities, label);
  code.one_hot.assign(identities.size(), 0.0f);
  code.one_hot[code.index] = 1.0f;
  return code;
}

template <typename T>
BasicGenerator<T> MakeGenerator(const GanArchitecture& arch,
                                std::vector<int> identities, uint64_t seed) {
  CheckArchitecture(arch);
  std::sort(identities.begin(), identities.end());
  if (identities.empty()) throw std::invalid_argument("generator needs identities");
  const int r = arch.resolution;
  const int s = r / 8;
  const auto& ec = arch.encoder_channels;
  const auto& dc = arch.decoder_channels;
  const int n_id = static_cast<int>(identities.size());
  BasicGenerator<T> gen;
  gen.arch = arch;
  gen.identities = std::move(identities);
  gen.encoder = NetworkBuilder({1, r, r}, "enc_")
                    .Conv2d(1, ec[0], 3, 2, 1).Relu()
                    .Conv2d(ec[0], ec[1], 3, 2, 1).Relu()
                    .Conv2d(ec[1], ec[2], 3, 2, 1).Relu()
                    .Flatten()
                    .Dense(ec[2] * s * s, 2 * arch.latent_dim)
                    .Build();
  gen.decoder = NetworkBuilder({arch.latent_dim}, "dec_")
                    .ConcatCondition(n_id)
                    .Dense(arch.latent_dim + n_id, dc[0] * s * s).Relu()
                    .Unflatten(dc[0], s, s)
                    .Upsample2x().Conv2d(dc[0], dc[1], 3, 1, 1).Relu()
                    .Upsample2x().Conv2d(dc[1], dc[2], 3, 1, 1).Relu()
                    .Upsample2x().Conv2d(dc[2], 1, 3, 1, 1).Sigmoid()
                    .Build();
  gen.params = InitParameters<T>(gen.encoder, DeriveSeed(seed, 0));
  gen.params.Merge(InitParameters<T>(gen.decoder, DeriveSeed(seed, 1)));
  return gen;
}

template <typename T>
BasicDiscriminator<T> MakeDiscriminator(const GanArchitecture& arch,
                                        std::vector<int> identities,
                                        uint64_t seed) {
  CheckArchitecture(arch);
  std::sort(identities.begin(), identities.end());
  if (identities.empty()) throw std::invalid_argument("discriminator needs identities");
  const int r = arch.resolution;
  const int s = r / 8;
  const auto& c = arch.discriminator_channels;
  const int features = c[2] * s * s;
  const int n_id = static_cast<int>(identities.size());
  BasicDiscriminator<T> disc;
  disc.arch = arch;
  disc.identities = std::move(identities);
  disc.trunk = NetworkBuilder({1, r, r}, "trunk_")
                   .Conv2d(1, c[0], 3, 2, 1).Relu()
                   .Conv2d(c[0], c[1], 3, 2, 1).Relu()
                   .Conv2d(c[1], c[2], 3, 2, 1).Relu()
                   .Flatten()
                   .Build();
  disc.real_fake = NetworkBuilder({features}, "rf_").Dense(features, 1).Sigmoid().Build();
  disc.identity = NetworkBuilder({features}, "id_").Dense(features, n_id).Softmax().Build();
  disc.task = NetworkBuilder({features}, "task_").Dense(features, 2).Softmax().Build();
  disc.params = InitParameters<T>(disc.trunk, DeriveSeed(seed, 0));
  disc.params.Merge(InitParameters<T>(disc.real_fake, DeriveSeed(seed, 1)));
  disc.params.Merge(InitParameters<T>(disc.identity, DeriveSeed(seed, 2)));
  disc.params.Merge(InitParameters<T>(disc.task, DeriveSeed(seed, 3)));
  return disc;
}

void TrainingHyperparams::Validate() const {
  for (double l : {lambda_g1, lambda_g2, lambda_g3, lambda_g4, lambda_d1,
                   lambda_d2, lambda_d3}) {
    if (!(l >= 0.0)) throw std::invalid_argument("lambda weights must be >= 0");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (!(log_clamp > 0.0 && log_clamp < 0.5)) {
    throw std::invalid_argument("log_clamp must lie in (0, 0.5)");
  }
  CheckArchitecture(arch);
  generator_optimizer.Validate();
  discriminator_optimizer.Validate();
}

template <typename T>
GanBatch<T> MakeBatch(std::span<const ImageSample* const> samples,
                      std::vector<int> replacement, uint64_t noise_seed) {
  if (samples.empty()) throw std::invalid_argument("empty batch");
  if (replacement.size() != samples.size()) {
    throw std::invalid_argument("one replacement identity per sample required");
  }
  const int rows = samples.front()->pixels.rows();
  const int cols = samples.front()->pixels.cols();
  GanBatch<T> batch;
  batch.images = BasicTensor<T>({static_cast<int>(samples.size()), 1, rows, cols});
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto px = samples[i]->pixels.pixels();
    if (samples[i]->pixels.rows() != rows || samples[i]->pixels.cols() != cols) {
      throw std::invalid_argument("batch images differ in size");
    }
    std::copy(px.begin(), px.end(), batch.images.raw() + i * px.size());
    batch.identity.push_back(samples[i]->identity);
    batch.pathology.push_back(samples[i]->pathology);
  }
  batch.replacement = std::move(replacement);
  batch.noise_seed = noise_seed;
  return batch;
}

// ---------------------------------------------------------------------------
// Latent space

std::vector<double> LatentNoise(int dim, uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> eps(dim);
  for (double& e : eps) e = gauss(rng);
  return eps;
}

LatentCode SampleLatentWithNoise(const LatentCode& code,
                                 std::span<const double> noise) {
  if (noise.size() != code.mu.size() || code.logvar.size() != code.mu.size()) {
    throw std::invalid_argument("latent noise dimension mismatch");
  }
  LatentCode out = code;
  std::vector<double> z(code.mu.size());
  for (size_t d = 0; d < z.size(); ++d) {
    z[d] = code.mu[d] + std::exp(0.5 * code.logvar[d]) * noise[d];
  }
  out.z = std::move(z);
  return out;
}

LatentCode SampleLatent(const LatentCode& code, uint64_t seed) {
  const auto eps = LatentNoise(static_cast<int>(code.mu.size()), seed);
  return SampleLatentWithNoise(code, eps);
}

double KlDivergence(const LatentCode& code) {
  if (code.mu.size() != code.logvar.size()) {
    throw std::invalid_argument("mu/logvar dimension mismatch");
  }
  double kl = 0.0;
  for (size_t d = 0; d < code.mu.size(); ++d) {
    const double m = code.mu[d], lv = code.logvar[d];
    if (!std::isfinite(m) || !std::isfinite(lv)) {
      throw std::invalid_argument("non-finite latent code");
    }
    kl += -0.5 * (1.0 + lv - m * m - std::exp(lv));
  }
  return kl;
}

std::pair<std::vector<double>, std::vector<double>> KlGradient(
    const LatentCode& code) {
  std::vector<double> dmu(code.mu.size()), dlv(code.logvar.size());
  for (size_t d = 0; d < code.mu.size(); ++d) {
    dmu[d] = code.mu[d];
    dlv[d] = 0.5 * (std::exp(code.logvar[d]) - 1.0);
  }
  return {dmu, dlv};
}

template <typename T>
LatentCode Encode(const BasicGenerator<T>& gen, const Image& image) {
  const int r = gen.arch.resolution;
  if (image.rows() != r || image.cols() != r) {
    throw std::invalid_argument("encode: image is " + std::to_string(image.rows()) +
                                "x" + std::to_string(image.cols()) +
                                ", generator expects " + std::to_string(r) + "x" +
                                std::to_string(r));
  }
  BasicTensor<T> x({1, 1, r, r});
  std::copy(image.pixels().begin(), image.pixels().end(), x.raw());
  const auto out = Predict(gen.encoder, gen.params, x);
  const int l = gen.latent_dim();
  LatentCode code;
  code.mu.assign(out.raw(), out.raw() + l);
  code.logvar.assign(out.raw() + l, out.raw() + 2 * l);
  return code;
}

template <typename T>
Image Decode(const BasicGenerator<T>& gen, std::span<const double> z,
             const IdentityCode& code) {
  if (static_cast<int>(z.size()) != gen.latent_dim()) {
    throw std::invalid_argument("decode: latent dimension mismatch");
  }
  if (static_cast<int>(code.one_hot.size()) != gen.n_identities()) {
    throw std::invalid_argument("decode: identity code width mismatch");
  }
  BasicTensor<T> zt({1, gen.latent_dim()}, std::vector<T>(z.begin(), z.end()));
  BasicTensor<T> ct({1, gen.n_identities()},
                    std::vector<T>(code.one_hot.begin(), code.one_hot.end()));
  const auto out = Predict(gen.decoder, gen.params, zt, &ct);
  const int r = gen.arch.resolution;
  std::vector<float> px(out.data().begin(), out.data().end());
  Image img(r, r, std::move(px));
  img.Clamp01();
  return img;
}

template <typename T>
Image Generate(const BasicGenerator<T>& gen, const Image& image,
               const IdentityCode& code, uint64_t seed) {
  const LatentCode sampled = SampleLatent(Encode(gen, image), seed);
  return Decode(gen, *sampled.z, code);
}

// ---------------------------------------------------------------------------
// Objectives

namespace {

// Generator forward pass over a batch with everything retained for backward.
template <typename T>
struct GeneratorPass {
  ForwardResult<T> encoder;
  BasicTensor<T> mu, logvar, noise, z, condition;
  ForwardResult<T> decoder;
};

template <typename T>
GeneratorPass<T> RunGenerator(const BasicGenerator<T>& gen,
                              const GanBatch<T>& batch, bool keep_tapes) {
  const int n = batch.images.dim(0);
  const int l = gen.latent_dim();
  GeneratorPass<T> pass;
  if (keep_tapes) {
    pass.encoder = Forward(gen.encoder, gen.params, batch.images);
  } else {
    pass.encoder.output = Predict(gen.encoder, gen.params, batch.images);
  }
  const auto& enc = pass.encoder.output;
  pass.mu = BasicTensor<T>({n, l});
  pass.logvar = BasicTensor<T>({n, l});
  pass.noise = BasicTensor<T>({n, l});
  pass.z = BasicTensor<T>({n, l});
  pass.condition = BasicTensor<T>({n, gen.n_identities()});
  for (int i = 0; i < n; ++i) {
    const auto eps = LatentNoise(l, DeriveSeed(batch.noise_seed, static_cast<uint64_t>(i)));
    for (int d = 0; d < l; ++d) {
      const size_t k = static_cast<size_t>(i) * l + d;
      pass.mu[k] = enc[static_cast<size_t>(i) * 2 * l + d];
      pass.logvar[k] = enc[static_cast<size_t>(i) * 2 * l + l + d];
      pass.noise[k] = static_cast<T>(eps[d]);
      pass.z[k] = pass.mu[k] + std::exp(T(0.5) * pass.logvar[k]) * pass.noise[k];
    }
    pass.condition[static_cast<size_t>(i) * gen.n_identities() +
                   IdentityIndex(gen.identities, batch.replacement[i])] = T(1);
  }
  if (keep_tapes) {
    pass.decoder = Forward(gen.decoder, gen.params, pass.z, &pass.condition);
  } else {
    pass.decoder.output = Predict(gen.decoder, gen.params, pass.z, &pass.condition);
  }
  return pass;
}

struct LogTerm {
  double value;
  double dvalue_dp;  // derivative w.r.t. the unclamped probability
};

// log(clamp(p)) and its derivative; zero slope where the clamp is active.
LogTerm LogOf(double p, double eps) {
  if (p <= eps) return {std::log(eps), 0.0};
  if (p >= 1.0 - eps) return {std::log1p(-eps), 0.0};
  return {std::log(p), 1.0 / p};
}

// log(1 - clamp(p)).
LogTerm LogOneMinus(double p, double eps) {
  if (p <= eps) return {std::log1p(-eps), 0.0};
  if (p >= 1.0 - eps) return {std::log(eps), 0.0};
  return {std::log1p(-p), -1.0 / (1.0 - p)};
}

}  // namespace

template <typename T>
LossResult<T> DiscriminatorLoss(const BasicDiscriminator<T>& disc,
                                const BasicGenerator<T>& gen,
                                const GanBatch<T>& batch,
                                const TrainingHyperparams& hp) {
  const int n = batch.images.size() ? batch.images.dim(0) : 0;
  if (n == 0) throw std::invalid_argument("discriminator_loss: empty batch");
  const double eps = hp.log_clamp;
  const int n_id = disc.n_identities();

  const BasicTensor<T> fake = RunGenerator(gen, batch, false).decoder.output;

  auto real_trunk = Forward(disc.trunk, disc.params, batch.images);
  auto real_rf = Forward(disc.real_fake, disc.params, real_trunk.output);
  auto real_id = Forward(disc.identity, disc.params, real_trunk.output);
  auto real_task = Forward(disc.task, disc.params, real_trunk.output);
  auto fake_trunk = Forward(disc.trunk, disc.params, fake);
  auto fake_rf = Forward(disc.real_fake, disc.params, fake_trunk.output);

  BasicTensor<T> g_real_rf({n, 1}), g_fake_rf({n, 1});
  BasicTensor<T> g_id({n, n_id}), g_task({n, 2});
  double total = 0.0;
  const double inv_n = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    const LogTerm real = LogOf(real_rf.output[i], eps);
    const LogTerm fake_term = LogOneMinus(fake_rf.output[i], eps);
    const int yid = IdentityIndex(disc.identities, batch.identity[i]);
    const LogTerm id = LogOf(real_id.output[static_cast<size_t>(i) * n_id + yid], eps);
    const int ye = batch.pathology[i];
    const LogTerm task = LogOf(real_task.output[static_cast<size_t>(i) * 2 + ye], eps);
    total += hp.lambda_d1 * (real.value + fake_term.value) + hp.lambda_d2 * id.value +
             hp.lambda_d3 * task.value;
    g_real_rf[i] = static_cast<T>(inv_n * hp.lambda_d1 * real.dvalue_dp);
    g_fake_rf[i] = static_cast<T>(inv_n * hp.lambda_d1 * fake_term.dvalue_dp);
    g_id[static_cast<size_t>(i) * n_id + yid] =
        static_cast<T>(inv_n * hp.lambda_d2 * id.dvalue_dp);
    g_task[static_cast<size_t>(i) * 2 + ye] =
        static_cast<T>(inv_n * hp.lambda_d3 * task.dvalue_dp);
  }

  LossResult<T> result;
  result.value = total * inv_n;
  auto b_real_rf = Backward(disc.real_fake, disc.params, real_rf.tape, g_real_rf);
  auto b_id = Backward(disc.identity, disc.params, real_id.tape, g_id);
  auto b_task = Backward(disc.task, disc.params, real_task.tape, g_task);
  auto b_fake_rf = Backward(disc.real_fake, disc.params, fake_rf.tape, g_fake_rf);

  BasicTensor<T> g_real_feat = b_real_rf.input;
  for (size_t k = 0; k < g_real_feat.size(); ++k) {
    g_real_feat[k] += b_id.input[k] + b_task.input[k];
  }
  auto b_real_trunk = Backward(disc.trunk, disc.params, real_trunk.tape, g_real_feat);
  auto b_fake_trunk = Backward(disc.trunk, disc.params, fake_trunk.tape, b_fake_rf.input);

  result.grads = b_real_trunk.params;
  result.grads.Accumulate(b_fake_trunk.params);
  result.grads.Accumulate(b_real_rf.params);
  result.grads.Accumulate(b_fake_rf.params);
  result.grads.Accumulate(b_id.params);
  result.grads.Accumulate(b_task.params);
  return result;
}

template <typename T>
LossResult<T> GeneratorLoss(const BasicDiscriminator<T>& disc,
                            const BasicGenerator<T>& gen,
                            const GanBatch<T>& batch,
                            const TrainingHyperparams& hp) {
  const int n = batch.images.size() ? batch.images.dim(0) : 0;
  if (n == 0) throw std::invalid_argument("generator_loss: empty batch");
  const double eps = hp.log_clamp;
  const int n_id = disc.n_identities();
  const int l = gen.latent_dim();

  GeneratorPass<T> pass = RunGenerator(gen, batch, true);
  const BasicTensor<T>& fake = pass.decoder.output;
  auto trunk = Forward(disc.trunk, disc.params, fake);
  auto rf = Forward(disc.real_fake, disc.params, trunk.output);
  auto id = Forward(disc.identity, disc.params, trunk.output);
  auto task = Forward(disc.task, disc.params, trunk.output);

  // Each adversarial term is log(1 - D) (as written) or -log D.
  auto term = [&](double p) {
    if (hp.non_saturating) {
      LogTerm t = LogOf(p, eps);
      return LogTerm{-t.value, -t.dvalue_dp};
    }
    return LogOneMinus(p, eps);
  };

  BasicTensor<T> g_rf({n, 1}), g_id({n, n_id}), g_task({n, 2});
  double total = 0.0;
  const double inv_n = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    const LogTerm t1 = term(rf.output[i]);
    const int c = IdentityIndex(disc.identities, batch.replacement[i]);
    const LogTerm t2 = term(id.output[static_cast<size_t>(i) * n_id + c]);
    const int ye = batch.pathology[i];
    const LogTerm t3 = term(task.output[static_cast<size_t>(i) * 2 + ye]);
    LatentCode code;
    for (int d = 0; d < l; ++d) {
      code.mu.push_back(pass.mu[static_cast<size_t>(i) * l + d]);
      code.logvar.push_back(pass.logvar[static_cast<size_t>(i) * l + d]);
    }
    const double kl = KlDivergence(code);
    total += hp.lambda_g1 * t1.value + hp.lambda_g2 * t2.value +
             hp.lambda_g3 * t3.value + hp.lambda_g4 * kl;
    g_rf[i] = static_cast<T>(inv_n * hp.lambda_g1 * t1.dvalue_dp);
    g_id[static_cast<size_t>(i) * n_id + c] = static_cast<T>(inv_n * hp.lambda_g2 * t2.dvalue_dp);
    g_task[static_cast<size_t>(i) * 2 + ye] = static_cast<T>(inv_n * hp.lambda_g3 * t3.dvalue_dp);
  }

  auto b_rf = Backward(disc.real_fake, disc.params, rf.tape, g_rf);
  auto b_id = Backward(disc.identity, disc.params, id.tape, g_id);
  auto b_task = Backward(disc.task, disc.params, task.tape, g_task);
  BasicTensor<T> g_feat = b_rf.input;
  for (size_t k = 0; k < g_feat.size(); ++k) g_feat[k] += b_id.input[k] + b_task.input[k];
  auto b_trunk = Backward(disc.trunk, disc.params, trunk.tape, g_feat);
  auto b_dec = Backward(gen.decoder, gen.params, pass.decoder.tape, b_trunk.input);

  // Through z = mu + exp(logvar / 2) * eps, plus the KL term.
  BasicTensor<T> g_enc({n, 2 * l});
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < l; ++d) {
      const size_t k = static_cast<size_t>(i) * l + d;
      const T dz = b_dec.input[k];
      const T lv = pass.logvar[k];
      const T sd = std::exp(T(0.5) * lv);
      const T kl_scale = static_cast<T>(inv_n * hp.lambda_g4);
      g_enc[static_cast<size_t>(i) * 2 * l + d] = dz + kl_scale * pass.mu[k];
      g_enc[static_cast<size_t>(i) * 2 * l + l + d] =
          dz * T(0.5) * sd * pass.noise[k] + kl_scale * T(0.5) * (std::exp(lv) - T(1));
    }
  }
  auto b_enc = Backward(gen.encoder, gen.params, pass.encoder.tape, g_enc);

  LossResult<T> result;
  result.value = total * inv_n;
  result.grads = b_enc.params;
  result.grads.Accumulate(b_dec.params);
  return result;
}

// ---------------------------------------------------------------------------
// Training

double RealFakeAccuracy(const DiscriminatorState& disc, const GeneratorState& gen,
                        const Dataset& val, uint64_t seed) {
  if (val.empty()) return 0.0;
  Rng rng(seed);
  std::uniform_int_distribution<size_t> pick(0, gen.identities.size() - 1);
  size_t correct = 0;
  constexpr size_t kChunk = 32;
  for (size_t start = 0; start < val.size(); start += kChunk) {
    const size_t end = std::min(val.size(), start + kChunk);
    std::vector<const ImageSample*> samples;
    std::vector<int> replacement;
    for (size_t i = start; i < end; ++i) {
      samples.push_back(&val[i]);
      replacement.push_back(gen.identities[pick(rng)]);
    }
    const auto batch = MakeBatch<float>(samples, replacement, DeriveSeed(seed, start));
    const Tensor fake = RunGenerator(gen, batch, false).decoder.output;
    const Tensor p_real =
        Predict(disc.real_fake, disc.params, Predict(disc.trunk, disc.params, batch.images));
    const Tensor p_fake =
        Predict(disc.real_fake, disc.params, Predict(disc.trunk, disc.params, fake));
    for (size_t i = 0; i < p_real.size(); ++i) {
      correct += p_real[i] > 0.5f;
      correct += p_fake[i] < 0.5f;
    }
  }
  return static_cast<double>(correct) / (2.0 * val.size());
}

GanTrainingResult TrainGan(const Dataset& train, const Dataset& val,
                           const TrainingHyperparams& hp) {
  hp.Validate();
  if (train.empty()) throw std::invalid_argument("train_gan: empty training set");
  for (const ImageSample& s : val.samples()) {
    if (!std::binary_search(train.identities().begin(), train.identities().end(),
                            s.identity)) {
      throw std::invalid_argument("train_gan: validation identity " +
                                  std::to_string(s.identity) + " absent from train");
    }
  }
  GanTrainingResult result;
  result.generator = MakeGenerator<float>(hp.arch, train.identities(), DeriveSeed(hp.seed, 1));
  result.discriminator =
      MakeDiscriminator<float>(hp.arch, train.identities(), DeriveSeed(hp.seed, 2));
  Optimizer<float> gen_opt(hp.generator_optimizer);
  Optimizer<float> disc_opt(hp.discriminator_optimizer);
  GeneratorState& gen = result.generator;
  DiscriminatorState& disc = result.discriminator;
  const auto& ids = gen.identities;

  int consecutive_bad = 0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(DeriveSeed(hp.seed, 3, static_cast<uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_int_distribution<size_t> pick(0, ids.size() - 1);

    double d_sum = 0.0, g_sum = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += hp.batch_size) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(hp.batch_size));
      std::vector<const ImageSample*> samples;
      std::vector<int> replacement;
      for (size_t i = start; i < end; ++i) {
        samples.push_back(&train[order[i]]);
        replacement.push_back(ids[pick(rng)]);
      }
      const uint64_t noise_seed =
          DeriveSeed(hp.seed, 4, static_cast<uint64_t>(epoch) * 1000003ULL + start);
      const auto batch = MakeBatch<float>(samples, replacement, noise_seed);

      LossResult<float> d = DiscriminatorLoss(disc, gen, batch, hp);
      bool finite = std::isfinite(d.value);
      if (finite) {
        d.grads.Scale(-1.0f);  // ascent
        disc_opt.Step(disc.params, d.grads);
      }
      LossResult<float> g = GeneratorLoss(disc, gen, batch, hp);
      finite = finite && std::isfinite(g.value);
      if (std::isfinite(g.value)) gen_opt.Step(gen.params, g.grads);
      if (!finite) {
        if (++consecutive_bad >= 3) {
          throw NumericalError("train_gan: non-finite loss for 3 consecutive batches "
                               "(epoch " + std::to_string(epoch + 1) + ")");
        }
        continue;
      }
      consecutive_bad = 0;
      d_sum += d.value;
      g_sum += g.value;
      ++batches;
    }
    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.discriminator_objective = batches ? d_sum / batches : 0.0;
    stats.generator_loss = batches ? g_sum / batches : 0.0;
    stats.val_real_fake_accuracy = RealFakeAccuracy(disc, gen, val, DeriveSeed(hp.seed, 5));
    result.history.push_back(stats);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Replacement identities and privatized sets

std::string PolicyName(const ReplacementPolicy& policy) {
  switch (policy.kind) {
    case ReplacementPolicy::Kind::kRandom:
      return "random";
    case ReplacementPolicy::Kind::kSamePathology:
      return "same_pathology";
    case ReplacementPolicy::Kind::kDifferentPathology:
      return "different_pathology";
    case ReplacementPolicy::Kind::kFixed:
      return "fixed:" + std::to_string(policy.fixed_identity);
    case ReplacementPolicy::Kind::kOriginal:
      return "original";
  }
  return "random";
}

ReplacementPolicy ParsePolicy(const std::string& text) {
  ReplacementPolicy p;
  if (text == "random") {
    p.kind = ReplacementPolicy::Kind::kRandom;
  } else if (text == "same_pathology") {
    p.kind = ReplacementPolicy::Kind::kSamePathology;
  } else if (text == "different_pathology") {
    p.kind = ReplacementPolicy::Kind::kDifferentPathology;
  } else if (text == "original") {
    p.kind = ReplacementPolicy::Kind::kOriginal;
  } else if (text.rfind("fixed:", 0) == 0) {
    p.kind = ReplacementPolicy::Kind::kFixed;
    p.fixed_identity = std::stoi(text.substr(6));
  } else {
    throw std::invalid_argument("unknown replacement policy '" + text + "'");
  }
  return p;
}

std::vector<int> ReplacementPool(const ReplacementPolicy& policy,
                                 const ImageSample& sample, const Dataset& train) {
  using Kind = ReplacementPolicy::Kind;
  const auto& ids = train.identities();
  switch (policy.kind) {
    case Kind::kOriginal:
      return {sample.identity};
    case Kind::kFixed:
      if (!std::binary_search(ids.begin(), ids.end(), policy.fixed_identity)) {
        throw std::invalid_argument("fixed identity " +
                                    std::to_string(policy.fixed_identity) +
                                    " is not a training identity");
      }
      return {policy.fixed_identity};
    case Kind::kRandom: {
      std::vector<int> pool;
      for (int id : ids) {
        if (id != sample.identity) pool.push_back(id);
      }
      return pool;
    }
    case Kind::kSamePathology:
    case Kind::kDifferentPathology: {
      const int wanted = policy.kind == Kind::kSamePathology ? sample.pathology
                                                             : 1 - sample.pathology;
      std::set<int> pool;
      for (const ImageSample& s : train.samples()) {
        if (s.pathology == wanted && s.identity != sample.identity) {
          pool.insert(s.identity);
        }
      }
      return {pool.begin(), pool.end()};
    }
  }
  return {};
}

IdentityCode ChooseReplacement(const ReplacementPolicy& policy,
                               const ImageSample& sample, const Dataset& train,
                               uint64_t seed) {
  const auto pool = ReplacementPool(policy, sample, train);
  if (pool.empty()) {
    throw std::invalid_argument("no replacement identity available for sample '" +
                                sample.id + "' under policy " + PolicyName(policy));
  }
  Rng rng(seed);
  std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
  return MakeIdentityCode(train.identities(), pool[pick(rng)]);
}

std::vector<PrivatizedImage> PrivatizeSet(const GeneratorState& gen,
                                          const Dataset& dataset,
                                          const ReplacementPolicy& policy,
                                          const Dataset& train, uint64_t seed) {
  std::vector<PrivatizedImage> out;
  out.reserve(dataset.size());
  for (size_t i = 0; i < dataset.size(); ++i) {
    const ImageSample& s = dataset[i];
    const uint64_t sample_seed = DeriveSeed(seed, i);
    IdentityCode code = ChooseReplacement(policy, s, train, DeriveSeed(sample_seed, 0));
    code = MakeIdentityCode(gen.identities, code.identity_label);
    PrivatizedImage img;
    img.pixels = Generate(gen, s.pixels, code, DeriveSeed(sample_seed, 1));
    img.method = PrivatizationMethod::kPprlVgan;
    img.params = "policy=" + PolicyName(policy);
    img.source_ids = {s.id};
    img.source_identities = {s.identity};
    img.replacement_identity = code.identity_label;
    img.original_sample_id = s.id;
    img.original_identity = s.identity;
    img.original_pathology = s.pathology;
    img.seed = sample_seed;
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<int> AveragedIdentities(int n, const ReplacementPolicy& policy,
                                    const ImageSample& sample, const Dataset& train,
                                    uint64_t seed) {
  if (n < 1) throw std::invalid_argument("averaging count n must be >= 1");
  std::vector<int> pool = ReplacementPool(policy, sample, train);
  pool.erase(std::remove(pool.begin(), pool.end(), sample.identity), pool.end());
  if (static_cast<int>(pool.size()) < n - 1) {
    throw std::invalid_argument(
        "averaged privatization of '" + sample.id + "' needs " + std::to_string(n - 1) +
        " distinct replacement identities, policy " + PolicyName(policy) + " offers " +
        std::to_string(pool.size()));
  }
  Rng rng(DeriveSeed(seed, 0, 0));
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<int> chosen = {sample.identity};
  chosen.insert(chosen.end(), pool.begin(), pool.begin() + (n - 1));
  return chosen;
}

PrivatizedImage AveragedPrivatize(const GeneratorState& gen, const ImageSample& sample,
                                  int n, const ReplacementPolicy& policy,
                                  const Dataset& train, uint64_t seed) {
  const auto chosen = AveragedIdentities(n, policy, sample, train, seed);
  std::vector<Image> generated;
  for (int j = 0; j < n; ++j) {
    const uint64_t s = j == 0 ? seed : DeriveSeed(seed, static_cast<uint64_t>(j));
    generated.push_back(
        Generate(gen, sample.pixels, MakeIdentityCode(gen.identities, chosen[j]), s));
  }
  std::vector<const Image*> ptrs;
  for (const Image& g : generated) ptrs.push_back(&g);
  PrivatizedImage img;
  img.pixels = MeanImage(ptrs);
  img.pixels.Clamp01();
  img.method = PrivatizationMethod::kPprlVganAvg;
  img.params = "n=" + std::to_string(n) + " policy=" + PolicyName(policy);
  img.source_ids = {sample.id};
  std::set<int> distinct(chosen.begin(), chosen.end());
  img.source_identities.assign(distinct.begin(), distinct.end());
  if (n > 1) img.replacement_identity = chosen[1];
  img.original_sample_id = sample.id;
  img.original_identity = sample.identity;
  img.original_pathology = sample.pathology;
  img.seed = seed;
  return img;
}

std::vector<PrivatizedImage> AveragedPrivatizeSet(const GeneratorState& gen,
                                                  const Dataset& dataset, int n,
                                                  const ReplacementPolicy& policy,
                                                  const Dataset& train,
                                                  uint64_t seed) {
  std::vector<PrivatizedImage> out;
  out.reserve(dataset.size());
  for (size_t i = 0; i < dataset.size(); ++i) {
    out.push_back(AveragedPrivatize(gen, dataset[i], n, policy, train, DeriveSeed(seed, i)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

std::string JoinInts(std::span<const int> values) {
  std::string s;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) s += ";";
    s += std::to_string(values[i]);
  }
  return s;
}

std::vector<int> SplitInts(const std::string& text) {
  std::vector<int> out;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t next = text.find(';', pos);
    if (next == std::string::npos) next = text.size();
    out.push_back(std::stoi(text.substr(pos, next - pos)));
    pos = next + 1;
  }
  return out;
}

const std::string& Require(const std::map<std::string, std::string>& meta,
                           const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw LoadError("GAN metadata lacks key '" + key + "'");
  return it->second;
}

}  // namespace

void SaveGan(const std::filesystem::path& prefix, const GeneratorState& gen,
             const DiscriminatorState& disc, uint64_t seed) {
  ParameterSet all;
  for (const auto& [name, t] : gen.params) all.Set("gen." + name, t);
  for (const auto& [name, t] : disc.params) all.Set("disc." + name, t);
  SaveCheckpoint(prefix.string() + ".psck", all);
  const auto& a = gen.arch;
  std::array<int, 9> ch = {a.encoder_channels[0], a.encoder_channels[1],
                           a.encoder_channels[2], a.decoder_channels[0],
                           a.decoder_channels[1], a.decoder_channels[2],
                           a.discriminator_channels[0], a.discriminator_channels[1],
                           a.discriminator_channels[2]};
  SaveMetadata(prefix.string() + ".meta",
               {{"n_identities", std::to_string(gen.n_identities())},
                {"latent_dim", std::to_string(a.latent_dim)},
                {"resolution", std::to_string(a.resolution)},
                {"seed", std::to_string(seed)},
                {"identities", JoinInts(gen.identities)},
                {"channels", JoinInts(ch)}});
}

LoadedGan LoadGan(const std::filesystem::path& prefix) {
  const auto meta = LoadMetadata(prefix.string() + ".meta");
  const ParameterSet all = LoadCheckpoint(prefix.string() + ".psck");
  GanArchitecture arch;
  arch.latent_dim = std::stoi(Require(meta, "latent_dim"));
  arch.resolution = std::stoi(Require(meta, "resolution"));
  const auto ch = SplitInts(Require(meta, "channels"));
  if (ch.size() != 9) throw LoadError("GAN metadata: bad channel list");
  for (int i = 0; i < 3; ++i) {
    arch.encoder_channels[i] = ch[i];
    arch.decoder_channels[i] = ch[3 + i];
    arch.discriminator_channels[i] = ch[6 + i];
  }
  const auto ids = SplitInts(Require(meta, "identities"));
  if (static_cast<int>(ids.size()) != std::stoi(Require(meta, "n_identities"))) {
    throw LoadError("GAN metadata: identity count mismatch");
  }
  LoadedGan out;
  out.generator = MakeGenerator<float>(arch, ids, 0);
  out.discriminator = MakeDiscriminator<float>(arch, ids, 0);
  out.seed = std::stoull(Require(meta, "seed"));
  auto restore = [&](ParameterSet& params, const std::string& prefix_name) {
    for (auto& [name, t] : params) {
      const std::string key = prefix_name + name;
      if (!all.Contains(key) || all.at(key).shape() != t.shape()) {
        throw LoadError("GAN checkpoint lacks tensor '" + key + "' of shape " +
                        ShapeString(t.shape()));
      }
      t = all.at(key);
    }
  };
  restore(out.generator.params, "gen.");
  restore(out.discriminator.params, "disc.");
  return out;
}

#define PRIVEX_INSTANTIATE_GAN(T)                                                  \
  template BasicGenerator<T> MakeGenerator<T>(const GanArchitecture&,              \
                                              std::vector<int>, uint64_t);         \
  template BasicDiscriminator<T> MakeDiscriminator<T>(const GanArchitecture&,      \
                                                      std::vector<int>, uint64_t); \
  template GanBatch<T> MakeBatch<T>(std::span<const ImageSample* const>,           \
                                    std::vector<int>, uint64_t);                   \
  template LatentCode Encode(const BasicGenerator<T>&, const Image&);              \
  template Image Decode(const BasicGenerator<T>&, std::span<const double>,         \
                        const IdentityCode&);                                      \
  template Image Generate(const BasicGenerator<T>&, const Image&,                  \
                          const IdentityCode&, uint64_t);                          \
  template LossResult<T> DiscriminatorLoss(const BasicDiscriminator<T>&,           \
                                           const BasicGenerator<T>&,               \
                                           const GanBatch<T>&,                     \
                                           const TrainingHyperparams&);            \
  template LossResult<T> GeneratorLoss(const BasicDiscriminator<T>&,               \
                                       const BasicGenerator<T>&,                   \
                                       const GanBatch<T>&,                         \
                                       const TrainingHyperparams&);

PRIVEX_INSTANTIATE_GAN(float)
PRIVEX_INSTANTIATE_GAN(double)

#undef PRIVEX_INSTANTIATE_GAN

}  // namespace privex
