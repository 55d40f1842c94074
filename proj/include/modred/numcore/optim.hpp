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

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "modred/errors.hpp"
#include "modred/numcore/tensor.hpp"

namespace modred::nc {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  AdamWConfig config;
  std::uint64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  AdamWState() = default;
  AdamWState(AdamWConfig cfg, std::span<const Tensor> params) : config(cfg) {
    for (const auto& p : params) {
      first_moment.emplace_back(p.numel(), 0.0);
      second_moment.emplace_back(p.numel(), 0.0);
    }
  }
};

// One decoupled-weight-decay Adam update over every parameter. Decay is
// applied first, p <- p - lr*wd*p, then the bias-corrected Adam step.
inline void adamw_step(std::span<Tensor> params, AdamWState& state, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("adamw_step: learning rate must be finite and >= 0");
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ShapeError("adamw_step: optimizer state does not match the parameter list");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (state.first_moment[k].size() != params[k].numel()) {
      throw ShapeError("adamw_step: moment shape differs for parameter " + std::to_string(k));
    }
    for (double g : params[k].grad()) {
      if (!std::isfinite(g)) throw NumericError("adamw_step: non-finite gradient in parameter " + std::to_string(k));
    }
  }
  const auto& c = state.config;
  const std::uint64_t t = ++state.step_count;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].mutable_data();
    const auto g = params[k].grad();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      p[i] -= lr * c.weight_decay * p[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

struct LrSchedule {
  double base_lr = 1e-3;
  int total_epochs = 200;
  // Linear warmup over the first warmup_epochs epochs; 0 disables it.
  int warmup_epochs = 0;
};

// base_lr * 0.5 * (1 + cos(pi * epoch / total_epochs)), epoch in [0, total].
inline double cosine_lr(int epoch, const LrSchedule& sched) {
  if (sched.total_epochs < 1) throw ConfigError("cosine_lr: total_epochs must be >= 1");
  if (epoch < 0 || epoch > sched.total_epochs) {
    throw ConfigError("cosine_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                      std::to_string(sched.total_epochs) + "]");
  }
  const double frac = static_cast<double>(epoch) / static_cast<double>(sched.total_epochs);
  double lr = sched.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
  if (epoch == sched.total_epochs) lr = 0.0;
  if (epoch < sched.warmup_epochs) {
    lr *= static_cast<double>(epoch + 1) / static_cast<double>(sched.warmup_epochs);
  }
  return lr;
}

}  // namespace modred::nc
