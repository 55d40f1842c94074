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
 * @file metrics.hpp
 * @brief Similarity measures, fold splits and summary statistics.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "modred/errors.hpp"
#include "modred/rng.hpp"

namespace modred::eval {

// Zero-lag Pearson correlation, clamped to [-1, 1] against rounding.
inline double pearson_corr(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("pearson_corr: length mismatch");
  if (x.size() < 2) throw DataError("pearson_corr: need at least 2 samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = x[i] - mx, b = y[i] - my;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericError("pearson_corr: zero-variance input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double cosine_sim(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("cosine_sim: length mismatch");
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw NumericError("cosine_sim: zero vector");
  return std::clamp(uv / std::sqrt(uu * vv), -1.0, 1.0);
}

inline double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Population standard deviation.
inline double std_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

struct FoldSplit {
  std::size_t k = 0;
  std::vector<std::size_t> fold_of;  // per index
  std::uint64_t seed = 0;
  bool subject_disjoint = false;

  std::vector<std::size_t> members(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
      if (fold_of[i] == f) out.push_back(i);
    return out;
  }
};

// Shuffled indices dealt round-robin into k folds.
inline FoldSplit kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > n) {
    throw DataError("cannot split " + std::to_string(n) + " items into " + std::to_string(k) + " non-empty folds");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {seed_tag::kFolds}));
  rng.shuffle(order);
  FoldSplit s{k, std::vector<std::size_t>(n), seed, false};
  for (std::size_t p = 0; p < n; ++p) s.fold_of[order[p]] = p % k;
  return s;
}

// Like kfold_split but whole subjects go to one fold.
inline FoldSplit subject_kfold_split(std::span<const std::string> subjects, std::size_t k, std::uint64_t seed) {
  std::vector<std::string> uniq;
  std::unordered_map<std::string, std::size_t> idx;
  for (const auto& s : subjects) {
    if (idx.emplace(s, uniq.size()).second) uniq.push_back(s);
  }
  const FoldSplit by_subject = kfold_split(uniq.size(), k, seed);
  FoldSplit s{k, std::vector<std::size_t>(subjects.size()), seed, true};
  for (std::size_t i = 0; i < subjects.size(); ++i) s.fold_of[i] = by_subject.fold_of[idx.at(subjects[i])];
  return s;
}

// F1 for positive class 1; defined as 1 when there are no positives at all.
inline double f1_score(std::span<const int> truth, std::span<const int> pred) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (pred[i] == 1 && truth[i] == 1) ++tp;
    if (pred[i] == 1 && truth[i] != 1) ++fp;
    if (pred[i] != 1 && truth[i] == 1) ++fn;
  }
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace modred::eval
