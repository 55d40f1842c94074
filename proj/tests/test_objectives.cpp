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
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "modred/numcore/gradcheck.hpp"
#include "modred/objectives/losses.hpp"
#include "modred/objectives/triplets.hpp"

using namespace modred;
using namespace modred::obj;
using nc::Tensor;

namespace {

Tensor random_matrix(std::size_t n, std::size_t d, std::uint64_t seed, bool grad = false) {
  Rng rng(seed);
  std::vector<double> v(n * d);
  for (auto& x : v) x = rng.normal();
  return Tensor::from({n, d}, std::move(v), grad);
}

// Unit vector in the plane at angle theta.
Tensor unit2(double theta) { return Tensor::from({1, 2}, {std::cos(theta), std::sin(theta)}); }

}  // namespace

TEST(ReconstructionLoss, ZeroForPerfectReconstruction) {
  auto x = random_matrix(3, 7, 1);
  EXPECT_EQ(reconstruction_loss(x, x), 0.0);
}

TEST(ReconstructionLoss, ForcedArithmetic) {
  EXPECT_DOUBLE_EQ(reconstruction_loss(Tensor::from({1, 2}, {0, 0}), Tensor::from({1, 2}, {1, 1})), 1.0);
}

TEST(ReconstructionLoss, HomogeneousOfDegreeTwo) {
  auto x = random_matrix(2, 9, 2), y = random_matrix(2, 9, 3);
  const double base = reconstruction_loss(x, y);
  EXPECT_NEAR(reconstruction_loss(nc::scale(x, 3.0), nc::scale(y, 3.0)), 9.0 * base, 1e-12);
}

TEST(ReconstructionLoss, MatchesBruteForceDoubleLoop) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t C = 1 + seed % 4, T = 3 + seed % 11;
    auto x = random_matrix(C, T, 100 + seed), y = random_matrix(C, T, 200 + seed);
    double acc = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      double per_channel = 0.0;
      for (std::size_t t = 0; t < T; ++t) per_channel += std::pow(x.at(c, t) - y.at(c, t), 2);
      acc += per_channel / static_cast<double>(T);
    }
    EXPECT_NEAR(reconstruction_loss(x, y), acc / static_cast<double>(C), 1e-12);
  }
}

TEST(ReconstructionLoss, ShapeMismatchThrows) {
  EXPECT_THROW(reconstruction_loss(random_matrix(2, 3, 1), random_matrix(3, 2, 1)), ShapeError);
}

TEST(SignalReconstructionLoss, MaskedOnlyAveragesMaskedPatches) {
  auto signal = Tensor::from({6}, {0, 0, 0, 0, 0, 0});
  auto pred = Tensor::from({3, 2}, {1, 1, 2, 2, 3, 3});
  mae::MaskPlan plan;
  plan.visible_idx = {0};
  plan.masked_idx = {2, 1};
  plan.restore_perm = {0, 2, 1};
  EXPECT_NEAR(signal_reconstruction_loss(signal, pred, plan, false).item(), (1 + 4 + 9) / 3.0, 1e-15);
  EXPECT_NEAR(signal_reconstruction_loss(signal, pred, plan, true).item(), (4 + 9) / 2.0, 1e-15);
  EXPECT_NEAR(signal_reconstruction_loss(signal, pred, mae::MaskPlan::none(3), true).item(), 14 / 3.0, 1e-15);
}

TEST(TripletLoss, SatisfiedMarginIsZero) {
  auto a = unit2(0.0), n = unit2(std::numbers::pi / 2);  // distance sqrt(2)
  EXPECT_EQ(triplet_loss(a, a, n, 0.2).item(), 0.0);
}

TEST(TripletLoss, ForcedArithmetic) {
  // Chord length 2 sin(theta / 2) on the unit circle.
  auto a = unit2(0.0);
  auto p = unit2(2 * std::asin(0.5));  // |a - p| = 1.0
  auto n = unit2(2 * std::asin(0.4));  // |a - n| = 0.8
  EXPECT_NEAR(triplet_loss(a, p, n, 0.5).item(), 0.7, 1e-12);
}

TEST(TripletLoss, NormalizesBeforeDistance) {
  auto a = unit2(0.0);
  auto p = unit2(2 * std::asin(0.5));
  auto n = unit2(2 * std::asin(0.4));
  EXPECT_NEAR(triplet_loss(nc::scale(a, 5.0), nc::scale(p, 0.1), nc::scale(n, 40.0), 0.5).item(), 0.7, 1e-12);
}

TEST(TripletLoss, ZeroNormEmbeddingThrows) {
  auto z = Tensor::zeros({1, 2});
  EXPECT_THROW(triplet_loss(z, unit2(0.3), unit2(1.0)), NumericError);
}

TEST(TripletLoss, GradientMatchesFiniteDifferences) {
  auto a = random_matrix(4, 8, 11, true), p = random_matrix(4, 8, 12, true), n = random_matrix(4, 8, 13, true);
  // A large margin keeps every hinge active, away from the kink. h = 1e-5
  // balances truncation against cancellation for this O(1) loss.
  auto res = nc::grad_check([&] { return triplet_loss(a, p, n, 2.5); }, {a, p, n}, {.step = 1e-5});
  EXPECT_LT(res.max_rel_error, 1e-6);
  EXPECT_EQ(res.checked, 96u);
}

TEST(TripletLoss, NonNegativeAndRotationInvariant) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const std::size_t d = 3 + seed % 4;
    auto a = random_matrix(5, d, 10 * seed + 1), p = random_matrix(5, d, 10 * seed + 2),
         n = random_matrix(5, d, 10 * seed + 3);
    const double base = triplet_loss(a, p, n, 0.3).item();
    EXPECT_GE(base, 0.0);
    // Random orthogonal matrix by Gram-Schmidt on a Gaussian draw.
    auto g = random_matrix(d, d, 10 * seed + 4);
    std::vector<std::vector<double>> q(d, std::vector<double>(d));
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t k = 0; k < d; ++k) q[i][k] = g.at(i, k);
      for (std::size_t j = 0; j < i; ++j) {
        double dot = 0;
        for (std::size_t k = 0; k < d; ++k) dot += q[i][k] * q[j][k];
        for (std::size_t k = 0; k < d; ++k) q[i][k] -= dot * q[j][k];
      }
      double norm = 0;
      for (std::size_t k = 0; k < d; ++k) norm += q[i][k] * q[i][k];
      for (std::size_t k = 0; k < d; ++k) q[i][k] /= std::sqrt(norm);
    }
    std::vector<double> flat;
    for (auto& row : q) flat.insert(flat.end(), row.begin(), row.end());
    auto Q = Tensor::from({d, d}, flat);
    EXPECT_NEAR(triplet_loss(nc::matmul(a, Q), nc::matmul(p, Q), nc::matmul(n, Q), 0.3).item(), base, 1e-12);
  }
}

TEST(Curriculum, Endpoints) {
  EXPECT_EQ(curriculum_weights({0, 200}), (CurriculumWeights{0.0, 1.0}));
  EXPECT_EQ(curriculum_weights({200, 200}), (CurriculumWeights{1.0, 0.0}));
  auto mid = curriculum_weights({100, 200});
  EXPECT_NEAR(mid.w_align, 0.7071, 1e-4);
  EXPECT_NEAR(mid.w_rec, 0.7071, 1e-4);
}

TEST(Curriculum, ClosedFormAndUnitCircle) {
  double prev_align = -1, prev_rec = 2;
  for (std::int64_t i = 0; i <= 200; ++i) {
    auto w = curriculum_weights({i, 200});
    const double phase = static_cast<double>(i) * std::numbers::pi / 400.0;
    EXPECT_NEAR(w.w_align, std::sin(phase), 1e-12);
    EXPECT_NEAR(w.w_rec, std::cos(phase), 1e-12);
    EXPECT_NEAR(w.w_align * w.w_align + w.w_rec * w.w_rec, 1.0, 1e-12);
    EXPECT_GE(w.w_align, 0.0);
    EXPECT_GE(w.w_rec, 0.0);
    EXPECT_GE(w.w_align, prev_align);
    EXPECT_LE(w.w_rec, prev_rec);
    prev_align = w.w_align;
    prev_rec = w.w_rec;
  }
  EXPECT_THROW(curriculum_weights({201, 200}), ConfigError);
  EXPECT_THROW(curriculum_weights({-1, 200}), ConfigError);
}

TEST(CombinedLoss, EndpointsAreExact) {
  EXPECT_EQ(combined_loss(0.37, 0.91, CurriculumState{0, 30}), 0.37);
  EXPECT_EQ(combined_loss(0.37, 0.91, CurriculumState{30, 30}), 0.91);
  EXPECT_THROW(combined_loss(NAN, 0.1, CurriculumState{3, 30}), NumericError);
}

TEST(CombinedLoss, EpochZeroGivesNoAlignmentGradient) {
  auto emb = random_matrix(4, 6, 5, true);
  auto recon_in = random_matrix(2, 3, 6, true);
  std::vector<Tensor> per_channel{nc::slice_rows(emb, 0, 2), nc::slice_rows(emb, 2, 4)};
  std::vector<std::string> ids{"r0", "r1"};
  auto ta = assign_triplets(ids, 2, 9);
  auto total = combined_loss(nc::mean(nc::square(recon_in)), alignment_loss(per_channel, ta), curriculum_weights({0, 10}));
  total.backward();
  for (double g : emb.grad()) EXPECT_EQ(g, 0.0);
  EXPECT_TRUE(recon_in.has_grad());
}

TEST(AssignTriplets, ExhaustiveSmallCase) {
  std::vector<std::string> ids{"a", "b"};
  auto ta = assign_triplets(ids, 2, 4);
  ASSERT_EQ(ta.triplets.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& t = ta.triplets[k];
    EXPECT_EQ(t.anchor, (EmbeddingRef{k / 2, k % 2}));
    EXPECT_EQ(t.positive.sample, t.anchor.sample);
    EXPECT_NE(t.positive.channel, t.anchor.channel);
    EXPECT_NE(ids[t.negative.sample], ids[t.anchor.sample]);
    EXPECT_LT(t.negative.channel, 2u);
  }
}

TEST(AssignTriplets, EveryAnchorOnceAndValidForLargerBatch) {
  std::vector<std::string> ids{"a", "b", "c", "a2", "c", "d"};
  auto ta = assign_triplets(ids, 5, 77);
  ASSERT_EQ(ta.triplets.size(), 30u);
  for (std::size_t k = 0; k < ta.triplets.size(); ++k) {
    const auto& t = ta.triplets[k];
    EXPECT_EQ(t.anchor, (EmbeddingRef{k / 5, k % 5}));
    EXPECT_NE(t.positive.channel, t.anchor.channel);
    EXPECT_EQ(t.positive.sample, t.anchor.sample);
    EXPECT_NE(ids[t.negative.sample], ids[t.anchor.sample]);
  }
  EXPECT_EQ(assign_triplets(ids, 5, 77), ta);
  EXPECT_NE(assign_triplets(ids, 5, 78), ta);
}

TEST(AssignTriplets, RejectsDegenerateBatches) {
  std::vector<std::string> one{"same", "same"};
  EXPECT_THROW(assign_triplets(one, 3, 1), DataError);
  std::vector<std::string> two{"x", "y"};
  EXPECT_THROW(assign_triplets(two, 1, 1), ConfigError);
}

TEST(AlignmentGradients, MatchGraphBackwardAndScaleWithWeight) {
  std::vector<std::string> ids{"a", "b", "c"};
  auto ta = assign_triplets(ids, 3, 5);
  std::vector<Tensor> mats{random_matrix(3, 4, 1, true), random_matrix(3, 4, 2, true), random_matrix(3, 4, 3, true)};
  alignment_loss(mats, ta).backward();
  auto g = alignment_gradients(mats, ta, 0.25);
  ASSERT_EQ(g.grads.size(), 3u);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(g.grads[c][i], 0.25 * mats[c].grad()[i], 1e-15);
  }
  auto zero = alignment_gradients(mats, ta, 0.0);
  for (auto& buf : zero.grads)
    for (double v : buf) EXPECT_EQ(v, 0.0);
}

TEST(AlignmentLoss, GradientMatchesFiniteDifferences) {
  std::vector<std::string> ids{"a", "b", "c", "d"};
  auto ta = assign_triplets(ids, 3, 8, 3.0);
  std::vector<Tensor> mats{random_matrix(4, 5, 21, true), random_matrix(4, 5, 22, true), random_matrix(4, 5, 23, true)};
  auto res = nc::grad_check([&] { return alignment_loss(mats, ta); }, mats, {.step = 1e-5});
  EXPECT_LT(res.max_rel_error, 1e-6);
}
