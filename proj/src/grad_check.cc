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

#include "privex/grad_check.h"

#include <algorithm>
#include <cmath>

#include "privex/error.h"

namespace privex {

template <typename T>
GradCheckResult GradCheck(const BasicParameterSet<T>& params,
                          const LossClosure<T>& loss, double epsilon,
                          size_t max_entries_per_tensor, double floor) {
  auto finite_or_throw = [](double v) {
    if (!std::isfinite(v)) throw NumericalError("grad_check: non-finite loss");
    return v;
  };
  BasicParameterSet<T> analytic;
  finite_or_throw(loss(params, &analytic));

  GradCheckResult result;
  BasicParameterSet<T> probe = params;
  for (const auto& [name, tensor] : params) {
    const size_t n = tensor.size();
    const size_t stride =
        (max_entries_per_tensor == 0 || n <= max_entries_per_tensor)
            ? 1
            : (n + max_entries_per_tensor - 1) / max_entries_per_tensor;
    auto& target = probe.at(name);
    for (size_t i = 0; i < n; i += stride) {
      const T original = target[i];
      target[i] = static_cast<T>(original + epsilon);
      const double up = finite_or_throw(loss(probe, nullptr));
      target[i] = static_cast<T>(original - epsilon);
      const double down = finite_or_throw(loss(probe, nullptr));
      target[i] = original;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a =
          analytic.Contains(name) ? static_cast<double>(analytic.at(name)[i]) : 0.0;
      const double err =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++result.entries_checked;
      if (err > result.max_relative_error || result.worst_parameter.empty()) {
        result.max_relative_error = std::max(result.max_relative_error, err);
        if (err >= result.max_relative_error) {
          result.worst_parameter = name;
          result.worst_index = i;
          result.worst_analytic = a;
          result.worst_numeric = numeric;
        }
      }
    }
  }
  return result;
}

template GradCheckResult GradCheck<float>(const BasicParameterSet<float>&,
                                          const LossClosure<float>&, double, size_t,
                                          double);
template GradCheckResult GradCheck<double>(const BasicParameterSet<double>&,
                                           const LossClosure<double>&, double,
                                           size_t, double);

}  // namespace privex
