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

#ifndef PRIVEX_RNG_H_
#define PRIVEX_RNG_H_

#include <cstdint>
#include <random>

namespace privex {

// All randomness flows through this engine. Results are reproducible within
// one build; distribution objects are implementation-defined across
// standard libraries.
using Rng = std::mt19937_64;

// Derives an independent child seed from (seed, stream). SplitMix64 finalizer.
inline uint64_t DeriveSeed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline uint64_t DeriveSeed(uint64_t seed, uint64_t a, uint64_t b) {
  return DeriveSeed(DeriveSeed(seed, a), b);
}

}  // namespace privex

#endif  // PRIVEX_RNG_H_
