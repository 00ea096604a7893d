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

#ifndef PRIVEX_DEEP_TAYLOR_H_
#define PRIVEX_DEEP_TAYLOR_H_

#include <filesystem>
#include <optional>
#include <vector>

#include "privex/classifier.h"
#include "privex/image.h"
#include "privex/network.h"
#include "privex/tensor.h"

namespace privex {

struct RelevanceMap {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // row-major, non-negative
  int predicted_class = 0;     // index into the score vector
  double output_score = 0.0;   // pre-softmax score of the explained class

  double at(int r, int c) const { return values[static_cast<size_t>(r) * cols + c]; }
  double Total() const;
};

// Relevance of every input pixel for one class score. Hidden layers use the
// z+ rule, the first weighted layer the z^B rule with pixel bounds [0, 1].
// Positive biases enter the denominators but receive no relevance. A trailing
// softmax is ignored; any layer other than dense, conv2d, relu, flatten or
// unflatten throws std::invalid_argument. `class_index` defaults to the
// highest-scoring class (lowest index on ties).
RelevanceMap DeepTaylor(const NetworkSpec& spec, const ParameterSet& params,
                        const Image& image,
                        std::optional<int> class_index = std::nullopt);
RelevanceMap DeepTaylor(const ClassifierState& model, const Image& image,
                        std::optional<int> class_index = std::nullopt);

// Relevance reaching each layer input, from the output (index = layer count)
// down to the image (index 0). Used to check conservation.
std::vector<double> RelevanceTotals(const NetworkSpec& spec,
                                    const ParameterSet& params,
                                    const Image& image,
                                    std::optional<int> class_index = std::nullopt);

// Max-normalized PGM plus a raw float sidecar (<stem>.psck, tensor
// "relevance" of shape (rows, cols)).
void WriteRelevance(const RelevanceMap& map, const std::filesystem::path& pgm_path);

}  // namespace privex

#endif  // PRIVEX_DEEP_TAYLOR_H_
