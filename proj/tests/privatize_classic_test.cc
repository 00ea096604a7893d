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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "privex/error.h"
#include "privex/privatize_classic.h"
#include "test_util.h"

namespace privex {
namespace {

using testing::MakeSample;
using testing::RandomDataset;
using testing::RandomImage;
using testing::TempDir;

TEST(GaussianKernelTest, SizeOneIsUnit) {
  const auto k = GaussianKernel(1, 0.7);
  ASSERT_EQ(k.size(), 1u);
  EXPECT_DOUBLE_EQ(k[0], 1.0);
}

TEST(GaussianKernelTest, NormalizedAndRotationSymmetric) {
  for (int size : {1, 3, 5, 9, 15, 21}) {
    for (double sigma : {0.3, 0.8, 2.0, 5.5}) {
      const auto k = GaussianKernel(size, sigma);
      double sum = 0;
      for (double v : k) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-6);
      for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
          // 90 degree rotation maps (r, c) to (c, size - 1 - r).
          EXPECT_NEAR(k[r * size + c], k[c * size + (size - 1 - r)], 1e-15);
        }
      }
    }
  }
}

TEST(GaussianKernelTest, MatchesFormula) {
  const double sigma = 0.8;
  double raw[9], total = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      raw[(dy + 1) * 3 + dx + 1] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      total += raw[(dy + 1) * 3 + dx + 1];
    }
  }
  const auto k = GaussianKernel(3, sigma);
  for (int i = 0; i < 9; ++i) EXPECT_NEAR(k[i], raw[i] / total, 1e-12);
}

TEST(GaussianKernelTest, RejectsBadArguments) {
  EXPECT_THROW(GaussianKernel(4, 1.0), std::invalid_argument);
  EXPECT_THROW(GaussianKernel(0, 1.0), std::invalid_argument);
  EXPECT_THROW(GaussianKernel(3, 0.0), std::invalid_argument);
}

TEST(BlurTest, AutoSigma) {
  EXPECT_DOUBLE_EQ((BlurConfig{9, std::nullopt}).ResolvedSigma(), 0.3 * (4 - 1) + 0.8);
  EXPECT_DOUBLE_EQ((BlurConfig{9, 2.5}).ResolvedSigma(), 2.5);
}

TEST(BlurTest, KernelOneIsIdentity) {
  const Image img = RandomImage(9, 7, 3);
  EXPECT_EQ(GaussianBlur(img, {1, std::nullopt}), img);
}

TEST(BlurTest, ConstantStaysConstant) {
  for (int k : {3, 9, 15, 21}) {
    const Image out = GaussianBlur(Image(16, 16, 0.42f), {k, std::nullopt});
    for (float p : out.pixels()) EXPECT_NEAR(p, 0.42f, 1e-6);
  }
}

TEST(BlurTest, ImpulseReproducesKernel) {
  Image img(9, 9, 0.0f);
  img.at(4, 4) = 1.0f;
  const double sigma = BlurConfig{3, std::nullopt}.ResolvedSigma();
  double raw[9], total = 0;
  for (int i = 0; i < 9; ++i) {
    const int dy = i / 3 - 1, dx = i % 3 - 1;
    raw[i] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
    total += raw[i];
  }
  const Image out = GaussianBlur(img, {3, std::nullopt});
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.at(3 + r, 3 + c), raw[r * 3 + c] / total, 1e-6);
  }
  EXPECT_NEAR(out.at(0, 0), 0.0f, 1e-7);
}

TEST(BlurTest, OversizedKernelFails) {
  EXPECT_THROW(GaussianBlur(Image(4, 4), {9, std::nullopt}), std::invalid_argument);
  EXPECT_NO_THROW(GaussianBlur(Image(4, 4), {7, std::nullopt}));
}

TEST(BlurTest, CommutesWithFlip) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const Image img = RandomImage(12, 10, seed);
    const BlurConfig cfg{static_cast<int>(1 + 2 * (seed % 5)), std::nullopt};
    const Image a = GaussianBlur(FlipHorizontal(img), cfg);
    const Image b = FlipHorizontal(GaussianBlur(img, cfg));
    for (size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.pixels()[i], b.pixels()[i], 1e-6);
  }
}

TEST(BlurTest, Provenance) {
  const auto out = Blur(MakeSample("x", RandomImage(8, 8, 1), 4, 1), {3, std::nullopt});
  EXPECT_EQ(out.method, PrivatizationMethod::kBlur);
  EXPECT_EQ(out.source_ids, std::vector<std::string>{"x"});
  EXPECT_EQ(out.source_identities, std::vector<int>{4});
  EXPECT_FALSE(out.replacement_identity.has_value());
  EXPECT_EQ(out.original_sample_id, "x");
  EXPECT_FALSE(VerifyKAnonymity({out}, 2).pass);
  EXPECT_TRUE(VerifyKAnonymity({out}, 1).pass);
}

TEST(KSameTest, KOneUsesOwnIdentity) {
  const Dataset d = RandomDataset(4, 3, 6, 1);
  const auto out = KSameSelect(d, {1}, 5);
  ASSERT_EQ(out.size(), d.size());
  for (size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(out[i].source_identities, std::vector<int>{d[i].identity});
    bool equals_own_image = false;
    for (const auto& s : d.samples()) {
      if (s.identity == d[i].identity && s.pixels == out[i].pixels) equals_own_image = true;
    }
    EXPECT_TRUE(equals_own_image) << d[i].id;
  }
}

TEST(KSameTest, SingleClusterIsMeanOfAll) {
  const Dataset d = RandomDataset(4, 1, 5, 2, /*all_negative=*/true);
  const auto out = KSameSelect(d, {4}, 1);
  for (const auto& o : out) {
    for (int r = 0; r < 5; ++r) {
      for (int c = 0; c < 5; ++c) {
        double mean = 0;
        for (const auto& s : d.samples()) mean += s.pixels.at(r, c);
        EXPECT_NEAR(o.pixels.at(r, c), mean / 4, 1e-6);
      }
    }
    EXPECT_EQ(o.source_identities, (std::vector<int>{0, 1, 2, 3}));
  }
}

TEST(KSameTest, TooFewIdentitiesNamesClass) {
  const Dataset d = RandomDataset(4, 2, 5, 3);  // 2 identities per class
  try {
    KSameSelect(d, {3}, 1);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("class"), std::string::npos) << e.what();
  }
}

TEST(KSameTest, StructuralProperties) {
  const Dataset d = RandomDataset(14, 3, 6, 4);  // 7 identities per class
  std::map<std::string, const ImageSample*> by_id;
  for (const auto& s : d.samples()) by_id[s.id] = &s;
  for (int k : {2, 3, 6, 7}) {
    const auto out = KSameSelect(d, {k}, 11);
    ASSERT_EQ(out.size(), d.size());
    EXPECT_TRUE(VerifyKAnonymity(out, k).pass) << k;
    for (int kp = 1; kp <= k; ++kp) EXPECT_TRUE(VerifyKAnonymity(out, kp).pass);
    std::map<std::vector<int>, const Image*> cluster_image;
    for (size_t i = 0; i < out.size(); ++i) {
      const auto& o = out[i];
      EXPECT_EQ(o.original_sample_id, d[i].id);
      EXPECT_EQ(o.method, PrivatizationMethod::kKSame);
      // Within [min, max] of contributors, pixelwise.
      for (size_t p = 0; p < o.pixels.size(); ++p) {
        float lo = 1, hi = 0;
        std::set<int> ids;
        std::set<int> classes;
        for (const auto& sid : o.source_ids) {
          const ImageSample* s = by_id.at(sid);
          lo = std::min(lo, s->pixels.pixels()[p]);
          hi = std::max(hi, s->pixels.pixels()[p]);
          ids.insert(s->identity);
          classes.insert(s->pathology);
        }
        ASSERT_GE(o.pixels.pixels()[p], lo - 1e-6f);
        ASSERT_LE(o.pixels.pixels()[p], hi + 1e-6f);
        if (p == 0) {
          EXPECT_EQ(std::vector<int>(ids.begin(), ids.end()), o.source_identities);
          EXPECT_EQ(classes, std::set<int>{d[i].pathology});
          EXPECT_EQ(o.source_ids.size(), o.source_identities.size());
        }
      }
      auto [it, inserted] = cluster_image.emplace(o.source_identities, &o.pixels);
      if (!inserted) EXPECT_EQ(*it->second, o.pixels);
    }
  }
}

TEST(KSameTest, Deterministic) {
  const Dataset d = RandomDataset(10, 2, 6, 5);
  const auto a = KSameSelect(d, {3}, 7);
  const auto b = KSameSelect(d, {3}, 7);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].pixels, b[i].pixels);
    EXPECT_EQ(a[i].source_ids, b[i].source_ids);
  }
}

TEST(AnonymityTest, HandBuiltViolation) {
  PrivatizedImage img;
  img.method = PrivatizationMethod::kKSame;
  img.original_sample_id = "s";
  img.original_identity = 1;
  img.source_ids = {"a", "b"};
  img.source_identities = {1, 2};
  const auto report = VerifyKAnonymity({img}, 3);
  EXPECT_FALSE(report.pass);
  EXPECT_EQ(report.violating_ids, std::vector<std::string>{"s"});
  EXPECT_TRUE(VerifyKAnonymity({img}, 2).pass);
  img.source_identities = {2, 3};
  EXPECT_FALSE(VerifyKAnonymity({img}, 2).pass);  // original not among sources
}

TEST(AnonymityTest, MissingProvenanceFails) {
  PrivatizedImage img;
  img.original_sample_id = "s";
  EXPECT_THROW(VerifyKAnonymity({img}, 1), std::invalid_argument);
}

TEST(PrivatizedSetTest, WriteReadRoundTrip) {
  TempDir dir;
  const Dataset d = RandomDataset(6, 2, 6, 8);
  auto out = KSameSelect(d, {3}, 1);
  out[0].replacement_identity = 5;
  WritePrivatizedSet(out, dir.path() / "set");
  const auto back = ReadPrivatizedSet(dir.path() / "set", d);
  ASSERT_EQ(back.size(), out.size());
  for (size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(back[i].method, out[i].method);
    EXPECT_EQ(back[i].params, out[i].params);
    EXPECT_EQ(back[i].source_ids, out[i].source_ids);
    EXPECT_EQ(back[i].source_identities, out[i].source_identities);
    EXPECT_EQ(back[i].replacement_identity, out[i].replacement_identity);
    EXPECT_EQ(back[i].original_sample_id, out[i].original_sample_id);
    EXPECT_EQ(back[i].original_identity, d[i].identity);
    EXPECT_EQ(back[i].original_pathology, d[i].pathology);
    for (size_t p = 0; p < out[i].pixels.size(); ++p) {
      EXPECT_NEAR(back[i].pixels.pixels()[p], out[i].pixels.pixels()[p], 0.5 / 255 + 1e-6);
    }
  }
  const std::string manifest = testing::ReadFile(dir.path() / "set" / "manifest.csv");
  EXPECT_EQ(manifest.substr(0, manifest.find('\n')),
            "id,path,method,params,original_id,replacement_identity,source_ids");
  EXPECT_THROW(ReadPrivatizedSet(dir.path() / "absent", d), MissingArtifactError);
}

}  // namespace
}  // namespace privex
