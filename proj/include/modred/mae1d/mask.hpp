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
#include <cstdint>
#include <numeric>
#include <vector>

#include "modred/errors.hpp"
#include "modred/rng.hpp"

namespace modred::mae {

// Partition of patch indices. visible_idx and masked_idx are in shuffled
// order (visible first); restore_perm[t] is the shuffled position holding
// temporal patch t.
struct MaskPlan {
  std::vector<std::size_t> visible_idx;
  std::vector<std::size_t> masked_idx;
  std::vector<std::size_t> restore_perm;

  std::size_t num_patches() const { return restore_perm.size(); }

  // Every patch visible, identity order.
  static MaskPlan none(std::size_t num_patches) {
    MaskPlan p;
    p.visible_idx.resize(num_patches);
    std::iota(p.visible_idx.begin(), p.visible_idx.end(), std::size_t{0});
    p.restore_perm = p.visible_idx;
    return p;
  }

  bool is_masked(std::size_t patch) const {
    return std::find(masked_idx.begin(), masked_idx.end(), patch) != masked_idx.end();
  }

  bool operator==(const MaskPlan&) const = default;
};

// floor(L * (1 - ratio)) patches are kept. The 1e-9 nudge absorbs binary
// rounding of 1 - ratio (e.g. 10 * (1 - 0.9)).
inline std::size_t visible_count(std::size_t num_patches, double mask_ratio) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(num_patches) * (1.0 - mask_ratio) + 1e-9));
}

// Seeded noise argsort: patches with the smallest noise are kept.
inline MaskPlan random_mask(std::size_t num_patches, double mask_ratio, std::uint64_t seed) {
  if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) throw ConfigError("random_mask: mask_ratio must lie in [0, 1)");
  Rng rng(seed);
  std::vector<double> noise(num_patches);
  for (auto& v : noise) v = rng.uniform();
  std::vector<std::size_t> shuffle(num_patches);
  std::iota(shuffle.begin(), shuffle.end(), std::size_t{0});
  std::stable_sort(shuffle.begin(), shuffle.end(), [&](std::size_t a, std::size_t b) { return noise[a] < noise[b]; });
  const std::size_t keep = visible_count(num_patches, mask_ratio);
  MaskPlan plan;
  plan.visible_idx.assign(shuffle.begin(), shuffle.begin() + static_cast<std::ptrdiff_t>(keep));
  plan.masked_idx.assign(shuffle.begin() + static_cast<std::ptrdiff_t>(keep), shuffle.end());
  plan.restore_perm.resize(num_patches);
  for (std::size_t pos = 0; pos < num_patches; ++pos) plan.restore_perm[shuffle[pos]] = pos;
  return plan;
}

}  // namespace modred::mae
