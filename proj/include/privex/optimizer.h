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

#ifndef PRIVEX_OPTIMIZER_H_
#define PRIVEX_OPTIMIZER_H_

#include <optional>

#include "privex/tensor.h"

namespace privex {

struct OptimizerConfig {
  enum class Kind { kSgd, kAdam };

  Kind kind = Kind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Rescales the whole gradient set when its global L2 norm exceeds this.
  std::optional<double> clip_norm;

  void Validate() const;
};

// Gradient-descent update rule with its moment state. Minimizes: callers
// maximizing an objective pass negated gradients.
template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  // sgd: p <- p - lr * g. adam: bias-corrected first/second moment update.
  void Step(BasicParameterSet<T>& params, const BasicParameterSet<T>& grads);

  const OptimizerConfig& config() const { return config_; }
  long steps() const { return steps_; }

 private:
  OptimizerConfig config_;
  long steps_ = 0;
  BasicParameterSet<T> first_moment_;
  BasicParameterSet<T> second_moment_;
};

}  // namespace privex

#endif  // PRIVEX_OPTIMIZER_H_
