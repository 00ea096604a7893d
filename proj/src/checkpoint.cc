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

#include "privex/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "privex/error.h"

namespace privex {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

template <typename U>
void Put(std::vector<uint8_t>& out, U value) {
  uint8_t buf[sizeof(U)];
  std::memcpy(buf, &value, sizeof(U));
  out.insert(out.end(), buf, buf + sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}

  template <typename U>
  U Get() {
    Need(sizeof(U));
    U value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return value;
  }

  std::string GetString(size_t n) {
    Need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void GetFloats(float* dst, size_t n) {
    Need(n * sizeof(float));
    std::memcpy(dst, bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void Need(size_t n) const {
    if (pos_ + n > bytes_.size()) throw LoadError("checkpoint truncated");
  }

  const std::vector<uint8_t>& bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::vector<uint8_t> EncodeCheckpoint(const ParameterSet& params) {
  std::vector<uint8_t> out = {'P', 'S', 'C', 'K'};
  Put<uint16_t>(out, kCheckpointVersion);
  Put<uint32_t>(out, static_cast<uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    if (name.size() > 0xFFFF) throw std::invalid_argument("tensor name too long");
    if (t.rank() > 0xFF) throw std::invalid_argument("tensor rank too large");
    Put<uint16_t>(out, static_cast<uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    Put<uint8_t>(out, static_cast<uint8_t>(t.rank()));
    for (int d : t.shape()) Put<uint32_t>(out, static_cast<uint32_t>(d));
    const auto* raw = reinterpret_cast<const uint8_t*>(t.raw());
    out.insert(out.end(), raw, raw + t.size() * sizeof(float));
  }
  return out;
}

ParameterSet DecodeCheckpoint(const std::vector<uint8_t>& bytes) {
  Reader in(bytes);
  if (in.GetString(4) != "PSCK") throw LoadError("not a PSCK checkpoint");
  const auto version = in.Get<uint16_t>();
  if (version != kCheckpointVersion) {
    throw LoadError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = in.Get<uint32_t>();
  ParameterSet params;
  for (uint32_t i = 0; i < count; ++i) {
    const auto name_len = in.Get<uint16_t>();
    std::string name = in.GetString(name_len);
    const auto rank = in.Get<uint8_t>();
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<int>(in.Get<uint32_t>());
    Tensor t(shape);
    in.GetFloats(t.raw(), t.size());
    if (params.Contains(name)) throw LoadError("duplicate tensor '" + name + "'");
    params.Set(name, std::move(t));
  }
  if (!in.done()) throw LoadError("trailing bytes after checkpoint");
  return params;
}

void SaveCheckpoint(const std::filesystem::path& path, const ParameterSet& params) {
  const auto bytes = EncodeCheckpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

ParameterSet LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("missing checkpoint " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return DecodeCheckpoint(bytes);
}

void SaveMetadata(const std::filesystem::path& path,
                  const std::map<std::string, std::string>& values) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [k, v] : values) out << k << "=" << v << "\n";
}

std::map<std::string, std::string> LoadMetadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("missing metadata " + path.string());
  std::map<std::string, std::string> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw LoadError("bad metadata line: " + line);
    values[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return values;
}

}  // namespace privex
