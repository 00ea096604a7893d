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

#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>

#include "privex/config.h"
#include "privex/error.h"
#include "test_util.h"

namespace privex {
namespace {

using testing::TempDir;

std::string ErrorOf(const std::string& text) {
  try {
    ParseConfig(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(ConfigTest, EmptyTextGivesDefaults) {
  const RunConfig c = ParseConfig("# nothing here\n\n");
  EXPECT_EQ(CanonicalConfig(c), CanonicalConfig(RunConfig()));
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.blur_kernel_sizes, (std::vector<int>{3, 9, 15, 21}));
  EXPECT_EQ(c.ksame_k_values, (std::vector<int>{3, 6, 9, 12}));
  EXPECT_EQ(c.averaging_n, 6);
  EXPECT_DOUBLE_EQ(c.gan.lambda_g1, 0.5);
  EXPECT_DOUBLE_EQ(c.gan.lambda_g4, 0.002);
  EXPECT_FALSE(c.gan.non_saturating);
  EXPECT_FALSE(c.manifest.has_value());
}

TEST(ConfigTest, ParsesSectionsAndLists) {
  const RunConfig c = ParseConfig(R"(
[run]
seed = 7
output_dir = out dir   # trailing comment
[synth]
n_identities = 12
lesion_region = 0.1, 0.2, 0.3, 0.4
[preprocess]
target_resolution = 32
crop = 1,2,30,40
flip_right_eye = false
[blur]
kernel_sizes = 5, 7
sigma = 1.5
[pprlvgan]
non_saturating = true
epochs = 3
averaging_n = 4
)");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.output_dir, "out dir");
  EXPECT_EQ(c.synth.n_identities, 12);
  EXPECT_DOUBLE_EQ(c.synth.lesion_region.bottom, 0.3);
  EXPECT_EQ(c.preprocess.target_resolution, 32);
  EXPECT_EQ(c.gan.arch.resolution, 32);
  ASSERT_TRUE(c.preprocess.crop_rect.has_value());
  EXPECT_EQ(c.preprocess.crop_rect->width, 40);
  EXPECT_FALSE(c.preprocess.flip_right_eye);
  EXPECT_EQ(c.blur_kernel_sizes, (std::vector<int>{5, 7}));
  EXPECT_EQ(c.blur_sigma, 1.5);
  EXPECT_TRUE(c.gan.non_saturating);
  EXPECT_EQ(c.gan.epochs, 3);
  EXPECT_EQ(c.averaging_n, 4);
}

TEST(ConfigTest, RejectsUnknownNamesAndBadValues) {
  EXPECT_NE(ErrorOf("[run]\nsede = 3\n").find("sede"), std::string::npos);
  EXPECT_NE(ErrorOf("[runn]\nseed = 3\n").find("runn"), std::string::npos);
  EXPECT_NE(ErrorOf("seed = 3\n"), "");  // key outside a section
  EXPECT_NE(ErrorOf("[run]\nseed\n"), "");
  EXPECT_NE(ErrorOf("[run]\nseed = -1\n"), "");
  EXPECT_NE(ErrorOf("[synth]\npathology_fraction = 1.5\n"), "");
  EXPECT_NE(ErrorOf("[ksame]\nk_values = 3,x\n"), "");
  EXPECT_NE(ErrorOf("[blur]\nkernel_sizes = 4\n"), "");
  EXPECT_NE(ErrorOf("[split]\ntrain = 0.9\n"), "");
  EXPECT_NE(ErrorOf("[pprlvgan]\nnon_saturating = maybe\n"), "");
  EXPECT_NE(ErrorOf("[run]\nseed = 1\nseed = 2\n"), "");
  EXPECT_NE(ErrorOf("[ksame]\nk_values = 3,6,3\n").find("duplicates"), std::string::npos);
}

TEST(ConfigTest, ExactlyOneDataSource) {
  const RunConfig c = ParseConfig("[data]\nmanifest = /data/m.csv\n");
  EXPECT_EQ(c.manifest, std::filesystem::path("/data/m.csv"));
  EXPECT_NE(ErrorOf("[data]\nmanifest = m.csv\n[synth]\nn_identities = 4\n"), "");
}

TEST(ConfigTest, LoadFromFile) {
  TempDir dir;
  {
    std::ofstream out(dir.path() / "c.ini");
    out << "[run]\nseed = 99\n";
  }
  EXPECT_EQ(LoadConfig(dir.path() / "c.ini").seed, 99u);
  EXPECT_THROW(LoadConfig(dir.path() / "absent.ini"), MissingArtifactError);
}

TEST(ConfigTest, EnvironmentOverrides) {
  RunConfig c;
  ::setenv("PRIVEX_SEED", "1234", 1);
  ::setenv("PRIVEX_OUTPUT_DIR", "/tmp/elsewhere", 1);
  ApplyEnvironment(c);
  EXPECT_EQ(c.seed, 1234u);
  EXPECT_EQ(c.output_dir, "/tmp/elsewhere");
  ::setenv("PRIVEX_SEED", "12x", 1);
  EXPECT_THROW(ApplyEnvironment(c), ConfigError);
  ::unsetenv("PRIVEX_SEED");
  ::unsetenv("PRIVEX_OUTPUT_DIR");
  RunConfig d;
  ApplyEnvironment(d);
  EXPECT_EQ(d.seed, 42u);
}

TEST(ConfigTest, HashTextIsFnv1a) {
  // Published FNV-1a 64-bit test vectors.
  EXPECT_EQ(HashText(""), "cbf29ce484222325");
  EXPECT_EQ(HashText("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(HashText("foobar"), "85944171f73967e8");
}

TEST(ConfigTest, StageHashesTrackTheirInputs) {
  const RunConfig base;
  RunConfig moved = base;
  moved.output_dir = "/somewhere/else";
  EXPECT_EQ(CanonicalConfig(moved) == CanonicalConfig(base), false);
  EXPECT_EQ(moved.DataHash(), base.DataHash());
  EXPECT_EQ(moved.EvaluateHash(), base.EvaluateHash());

  RunConfig cls = base;
  cls.classifier.epochs = 5;
  EXPECT_EQ(cls.DataHash(), base.DataHash());
  EXPECT_EQ(cls.GanHash(), base.GanHash());
  EXPECT_EQ(cls.PrivatizeHash(), base.PrivatizeHash());
  EXPECT_NE(cls.ClassifierHash(), base.ClassifierHash());
  EXPECT_NE(cls.EvaluateHash(), base.EvaluateHash());

  RunConfig gan = base;
  gan.gan.epochs = 5;
  EXPECT_EQ(gan.ClassifierHash(), base.ClassifierHash());
  EXPECT_NE(gan.GanHash(), base.GanHash());
  EXPECT_NE(gan.PrivatizeHash(), base.PrivatizeHash());

  RunConfig data = base;
  data.seed = 43;
  for (auto h : {&RunConfig::DataHash, &RunConfig::GanHash, &RunConfig::ClassifierHash,
                 &RunConfig::PrivatizeHash, &RunConfig::EvaluateHash}) {
    EXPECT_NE((data.*h)(), (base.*h)());
    EXPECT_EQ((base.*h)().size(), 16u);
  }
}

}  // namespace
}  // namespace privex
