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

#ifndef PRIVEX_TESTS_TEST_UTIL_H_
#define PRIVEX_TESTS_TEST_UTIL_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "privex/dataset.h"
#include "privex/image.h"
#include "privex/network.h"
#include "privex/pprlvgan.h"
#include "privex/tensor.h"

namespace privex::testing {

// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

Image RandomImage(int rows, int cols, uint64_t seed);

ImageSample MakeSample(const std::string& id, Image pixels, int identity,
                       int pathology, EyeSide side = EyeSide::kLeft);

// n_identities x per_identity random images; identity i has pathology
// (i % 2) unless all_negative.
Dataset RandomDataset(int n_identities, int per_identity, int size,
                      uint64_t seed, bool all_negative = false);

template <typename T>
BasicTensor<T> RandomTensor(Shape shape, uint64_t seed, double scale = 1.0);

// Shifts every bias by U(-scale, scale) so no unit sits exactly on a relu
// kink, where finite differences and the backward subgradient disagree.
template <typename T>
void JitterBiases(BasicParameterSet<T>& params, uint64_t seed, double scale = 0.05);

// Smallest |pre-activation| entering any relu layer of a recorded pass.
template <typename T>
double ReluMargin(const NetworkSpec& spec, const Tape<T>& tape);

// ReluMargin over every network touched by one GAN loss evaluation.
template <typename T>
double GanReluMargin(const BasicGenerator<T>& gen, const BasicDiscriminator<T>& disc,
                     const GanBatch<T>& batch);

std::string ReadFile(const std::filesystem::path& path);

}  // namespace privex::testing

#endif  // PRIVEX_TESTS_TEST_UTIL_H_
