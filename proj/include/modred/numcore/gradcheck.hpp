/*
 * Copyright 2026 The modred Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "modred/numcore/tensor.hpp"

namespace modred::nc {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

struct GradCheckOptions {
  double step = 1e-6;
  // Denominator floor: components whose reverse-mode and finite-difference
  // magnitudes are both below this are compared in absolute terms.
  double floor = 1e-7;
  // 0 checks every component; otherwise at most this many per input, spread
  // evenly over the flat index range.
  std::size_t max_per_input = 0;
};

// Compares the reverse-mode gradient of the scalar f() with respect to each
// leaf in `inputs` against central finite differences. f must rebuild its
// graph from the current leaf values on every call.
inline GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                                  GradCheckOptions opt = {}) {
  for (auto& x : inputs) x.zero_grad();
  f().backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const auto& x : inputs) {
    auto g = x.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(x.numel(), 0.0);
  }

  GradCheckResult res;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto vals = inputs[k].mutable_data();
    const std::size_t n = vals.size();
    const std::size_t stride =
        (opt.max_per_input == 0 || n <= opt.max_per_input) ? 1 : (n + opt.max_per_input - 1) / opt.max_per_input;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = vals[i];
      vals[i] = saved + opt.step;
      const double fp = f().item();
      vals[i] = saved - opt.step;
      const double fm = f().item();
      vals[i] = saved;
      const double numeric = (fp - fm) / (2.0 * opt.step);
      const double a = analytic[k][i];
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
      res.max_abs_error = std::max(res.max_abs_error, abs_err);
      res.max_rel_error = std::max(res.max_rel_error, abs_err / denom);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace modred::nc
