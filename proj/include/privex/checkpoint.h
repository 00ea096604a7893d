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

#ifndef PRIVEX_CHECKPOINT_H_
#define PRIVEX_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "privex/tensor.h"

namespace privex {

// Binary layout, little-endian:
//   "PSCK" | u16 version | u32 tensor count |
//   per tensor: u16 name length, UTF-8 name, u8 rank, u32 dims..., f32 data.
// Tensors are written in name order.
inline constexpr uint16_t kCheckpointVersion = 1;

std::vector<uint8_t> EncodeCheckpoint(const ParameterSet& params);
ParameterSet DecodeCheckpoint(const std::vector<uint8_t>& bytes);

void SaveCheckpoint(const std::filesystem::path& path, const ParameterSet& params);
ParameterSet LoadCheckpoint(const std::filesystem::path& path);

// Sidecar metadata: one key=value per line, keys sorted.
void SaveMetadata(const std::filesystem::path& path,
                  const std::map<std::string, std::string>& values);
std::map<std::string, std::string> LoadMetadata(const std::filesystem::path& path);

}  // namespace privex

#endif  // PRIVEX_CHECKPOINT_H_
