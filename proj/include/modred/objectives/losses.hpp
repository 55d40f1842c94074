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

/**
 * @file losses.hpp
 * @brief Reconstruction MSE, triplet alignment and the sin/cos curriculum.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "modred/errors.hpp"
#include "modred/mae1d/mask.hpp"
#include "modred/mae1d/model.hpp"
#include "modred/numcore/ops.hpp"

namespace modred::obj {

using nc::Tensor;

inline constexpr double kDefaultMargin = 0.2;

// Mean squared error over every channel and sample of (C, T) arrays.
inline double reconstruction_loss(const Tensor& x, const Tensor& x_hat) {
  if (x.shape() != x_hat.shape()) {
    throw ShapeError("reconstruction_loss: shapes " + nc::shape_str(x.shape()) + " and " +
                     nc::shape_str(x_hat.shape()) + " differ");
  }
  if (x.numel() == 0) throw ShapeError("reconstruction_loss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double e = x.data()[i] - x_hat.data()[i];
    acc += e * e;
  }
  return acc / static_cast<double>(x.numel());
}

// Differentiable per-signal reconstruction loss. signal is (signal_len),
// pred is the decoder output (L, patch_len). With masked_only the mean runs
// over masked patches alone; a plan without masked patches falls back to all.
inline Tensor signal_reconstruction_loss(const Tensor& signal, const Tensor& pred, const mae::MaskPlan& plan,
                                         bool masked_only) {
  const Tensor target = mae::patchify(signal, pred.rank() == 2 ? pred.dim(1) : 0);
  if (target.shape() != pred.shape()) {
    throw ShapeError("signal_reconstruction_loss: prediction " + nc::shape_str(pred.shape()) +
                     " does not match target " + nc::shape_str(target.shape()));
  }
  if (!masked_only || plan.masked_idx.empty()) return nc::mse(pred, target);
  return nc::mse(nc::take_rows(pred, plan.masked_idx), nc::take_rows(target, plan.masked_idx));
}

// Mean over the batch of max(0, |a-p| - |a-n| + margin), on L2-normalized rows.
inline Tensor triplet_loss(const Tensor& anchors, const Tensor& positives, const Tensor& negatives,
                           double margin = kDefaultMargin) {
  if (anchors.rank() != 2 || positives.shape() != anchors.shape() || negatives.shape() != anchors.shape()) {
    throw ShapeError("triplet_loss: anchors, positives and negatives must share one (B, d) shape");
  }
  if (!std::isfinite(margin) || margin < 0.0) throw ConfigError("triplet_loss: margin must be finite and >= 0");
  const Tensor a = nc::row_l2_normalize(anchors);
  const Tensor p = nc::row_l2_normalize(positives);
  const Tensor n = nc::row_l2_normalize(negatives);
  const Tensor d_pos = nc::row_norms(nc::sub(a, p));
  const Tensor d_neg = nc::row_norms(nc::sub(a, n));
  const Tensor shift = Tensor::full({anchors.dim(0)}, margin);
  return nc::mean(nc::relu(nc::add(nc::sub(d_pos, d_neg), shift)));
}

struct CurriculumState {
  std::int64_t epoch = 0;
  std::int64_t total_epochs = 200;
};

struct CurriculumWeights {
  double w_align = 0.0;
  double w_rec = 1.0;

  bool operator==(const CurriculumWeights&) const = default;
};

// w_align = sin(i/N * pi/2), w_rec = cos(i/N * pi/2). The endpoints are
// returned exactly, since cos(pi/2) is not representable as 0.
inline CurriculumWeights curriculum_weights(const CurriculumState& s) {
  if (s.total_epochs < 1 || s.epoch < 0 || s.epoch > s.total_epochs) {
    throw ConfigError("curriculum_weights: epoch " + std::to_string(s.epoch) + " outside [0, " +
                      std::to_string(s.total_epochs) + "]");
  }
  if (s.epoch == 0) return {0.0, 1.0};
  if (s.epoch == s.total_epochs) return {1.0, 0.0};
  const double phase = static_cast<double>(s.epoch) / static_cast<double>(s.total_epochs) * std::numbers::pi / 2;
  return {std::sin(phase), std::cos(phase)};
}

inline double combined_loss(double rec, double align, const CurriculumWeights& w) {
  if (!std::isfinite(rec) || !std::isfinite(align)) throw NumericError("combined_loss: non-finite input");
  return w.w_align * align + w.w_rec * rec;
}

inline double combined_loss(double rec, double align, const CurriculumState& s) {
  return combined_loss(rec, align, curriculum_weights(s));
}

// Graph version; a zero weight drops that term so it contributes no gradient.
inline Tensor combined_loss(const Tensor& rec, const Tensor& align, const CurriculumWeights& w) {
  if (w.w_align == 0.0) return nc::scale(rec, w.w_rec);
  if (w.w_rec == 0.0) return nc::scale(align, w.w_align);
  return nc::add(nc::scale(align, w.w_align), nc::scale(rec, w.w_rec));
}

}  // namespace modred::obj
