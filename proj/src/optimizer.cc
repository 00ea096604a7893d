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

#include "privex/optimizer.h"

#include <cmath>
#include <stdexcept>

namespace privex {

void OptimizerConfig::Validate() const {
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be positive");
  }
  if (kind == Kind::kAdam) {
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
      throw std::invalid_argument("adam betas must lie in (0, 1)");
    }
    if (!(epsilon > 0.0)) throw std::invalid_argument("adam epsilon must be positive");
  }
  if (clip_norm && !(*clip_norm > 0.0)) {
    throw std::invalid_argument("clip_norm must be positive");
  }
}

template <typename T>
Optimizer<T>::Optimizer(OptimizerConfig config) : config_(config) {
  config_.Validate();
}

template <typename T>
void Optimizer<T>::Step(BasicParameterSet<T>& params,
                        const BasicParameterSet<T>& grads) {
  for (const auto& [name, g] : grads) {
    if (!params.Contains(name) || params.at(name).shape() != g.shape()) {
      throw std::invalid_argument("optimizer: gradient '" + name +
                                  "' does not match any parameter shape");
    }
  }
  double scale = 1.0;
  if (config_.clip_norm) {
    double sq = 0.0;
    for (const auto& [name, g] : grads) {
      for (T v : g.data()) sq += static_cast<double>(v) * v;
    }
    const double norm = std::sqrt(sq);
    if (norm > *config_.clip_norm) scale = *config_.clip_norm / norm;
  }
  ++steps_;
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerConfig::Kind::kSgd) {
    for (const auto& [name, g] : grads) {
      auto p = params.at(name).data();
      auto gd = g.data();
      for (size_t i = 0; i < p.size(); ++i) {
        p[i] = static_cast<T>(p[i] - lr * scale * gd[i]);
      }
    }
    return;
  }
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (const auto& [name, g] : grads) {
    if (!first_moment_.Contains(name)) {
      first_moment_.Set(name, BasicTensor<T>(g.shape()));
      second_moment_.Set(name, BasicTensor<T>(g.shape()));
    }
    auto p = params.at(name).data();
    auto m = first_moment_.at(name).data();
    auto v = second_moment_.at(name).data();
    auto gd = g.data();
    for (size_t i = 0; i < p.size(); ++i) {
      const double gi = scale * gd[i];
      m[i] = static_cast<T>(b1 * m[i] + (1.0 - b1) * gi);
      v[i] = static_cast<T>(b2 * v[i] + (1.0 - b2) * gi * gi);
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] = static_cast<T>(p[i] - lr * m_hat / (std::sqrt(v_hat) + config_.epsilon));
    }
  }
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace privex
