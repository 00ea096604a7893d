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

#ifndef PRIVEX_GRAD_CHECK_H_
#define PRIVEX_GRAD_CHECK_H_

#include <cstddef>
#include <functional>
#include <string>

#include "privex/tensor.h"

namespace privex {

// Scalar loss over a parameter set. When `grads` is non-null the closure also
// fills it with the analytic gradient of the returned value.
template <typename T>
using LossClosure =
    std::function<double(const BasicParameterSet<T>& params,
                         BasicParameterSet<T>* grads)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  size_t entries_checked = 0;
};

// Compares analytic gradients against central differences
// (f(p + eps) - f(p - eps)) / (2 eps), reporting
// max |analytic - numeric| / max(|analytic|, |numeric|, floor).
// Entries smaller than `floor` are thus held to an absolute tolerance, since
// there the truncation error of the difference quotient (about
// eps^2 |f'''| / 6) is comparable to the gradient itself.
// `max_entries_per_tensor` = 0 checks every entry; otherwise an evenly strided
// subset. Throws NumericalError on a non-finite loss.
template <typename T>
GradCheckResult GradCheck(const BasicParameterSet<T>& params,
                          const LossClosure<T>& loss, double epsilon,
                          size_t max_entries_per_tensor = 0, double floor = 1e-4);

}  // namespace privex

#endif  // PRIVEX_GRAD_CHECK_H_
