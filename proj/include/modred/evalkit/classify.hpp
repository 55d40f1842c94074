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
 * @file classify.hpp
 * @brief Cross-validated logistic regression (F1) and k-nearest-neighbour
 *        identification (accuracy) over embedding rows.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "modred/errors.hpp"
#include "modred/evalkit/metrics.hpp"

namespace modred::eval {

using FeatureRows = std::vector<std::vector<double>>;

struct CvResult {
  std::string metric;
  std::vector<double> per_fold;
  double mean = 0.0;
  double std = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::size_t check_rows(const FeatureRows& x) {
  if (x.empty()) throw DataError("no feature rows");
  const std::size_t d = x.front().size();
  if (d == 0) throw DataError("feature rows are empty");
  for (const auto& r : x)
    if (r.size() != d) throw ShapeError("feature rows differ in length");
  return d;
}

inline CvResult finish(std::string metric, std::vector<double> per_fold, std::uint64_t seed) {
  CvResult r{std::move(metric), std::move(per_fold), 0.0, 0.0, seed};
  r.mean = mean_of(r.per_fold);
  r.std = std_of(r.per_fold);
  return r;
}

}  // namespace detail

struct LogRegConfig {
  double lambda = 1e-2;
  std::size_t iterations = 500;
  double step = 0.1;
};

// Fitted on standardized features; predict() applies the same transform.
class LogisticRegression {
 public:
  LogisticRegression(const FeatureRows& x, const std::vector<int>& y, const LogRegConfig& cfg = {}) {
    const std::size_t d = detail::check_rows(x);
    const double n = static_cast<double>(x.size());
    mean_.assign(d, 0.0);
    scale_.assign(d, 0.0);
    for (const auto& r : x)
      for (std::size_t j = 0; j < d; ++j) mean_[j] += r[j] / n;
    for (const auto& r : x)
      for (std::size_t j = 0; j < d; ++j) scale_[j] += (r[j] - mean_[j]) * (r[j] - mean_[j]) / n;
    // Constant features standardize to zero.
    for (auto& s : scale_) s = s > 0.0 ? 1.0 / std::sqrt(s) : 0.0;

    FeatureRows z;
    z.reserve(x.size());
    for (const auto& r : x) z.push_back(standardize(r));
    w_.assign(d, 0.0);
    std::vector<double> gw(d);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
      std::fill(gw.begin(), gw.end(), 0.0);
      double gb = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double err = sigmoid(logit(z[i])) - static_cast<double>(y[i]);
        for (std::size_t j = 0; j < d; ++j) gw[j] += err * z[i][j] / n;
        gb += err / n;
      }
      for (std::size_t j = 0; j < d; ++j) w_[j] -= cfg.step * (gw[j] + cfg.lambda * w_[j]);
      b_ -= cfg.step * gb;
    }
  }

  double probability(const std::vector<double>& row) const { return sigmoid(logit(standardize(row))); }
  int predict(const std::vector<double>& row) const { return probability(row) >= 0.5 ? 1 : 0; }

 private:
  static double sigmoid(double t) {
    return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
  }
  double logit(const std::vector<double>& z) const {
    double t = b_;
    for (std::size_t j = 0; j < z.size(); ++j) t += w_[j] * z[j];
    return t;
  }
  std::vector<double> standardize(const std::vector<double>& r) const {
    std::vector<double> z(r.size());
    for (std::size_t j = 0; j < r.size(); ++j) z[j] = (r[j] - mean_[j]) * scale_[j];
    return z;
  }

  std::vector<double> mean_, scale_, w_;
  double b_ = 0.0;
};

// Record-level k-fold logistic regression; returns per-fold F1.
inline CvResult logreg_cv(const FeatureRows& x, const std::vector<int>& y, std::size_t folds, std::uint64_t seed,
                          const LogRegConfig& cfg = {}) {
  detail::check_rows(x);
  if (x.size() != y.size()) throw ShapeError("logreg_cv: label count differs from row count");
  for (int v : y)
    if (v != 0 && v != 1) throw DataError("logreg_cv: labels must be 0 or 1");
  if (std::set<int>(y.begin(), y.end()).size() < 2) throw DataError("logreg_cv: labels take a single value");
  const FoldSplit split = kfold_split(x.size(), folds, seed);
  std::vector<double> scores;
  for (std::size_t f = 0; f < folds; ++f) {
    FeatureRows tx;
    std::vector<int> ty;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (split.fold_of[i] == f) continue;
      tx.push_back(x[i]);
      ty.push_back(y[i]);
    }
    if (std::set<int>(ty.begin(), ty.end()).size() < 2) {
      throw DataError("logreg_cv: training fold " + std::to_string(f) + " holds a single label");
    }
    const LogisticRegression model(tx, ty, cfg);
    std::vector<int> truth, pred;
    for (std::size_t i : split.members(f)) {
      truth.push_back(y[i]);
      pred.push_back(model.predict(x[i]));
    }
    scores.push_back(f1_score(truth, pred));
  }
  return detail::finish("f1", std::move(scores), seed);
}

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

// Majority vote over the k nearest training rows in (distance, index) order;
// a tied vote goes to the tied label seen first, i.e. the nearest one.
inline std::string knn_predict(const FeatureRows& x, const std::vector<std::string>& labels,
                               const std::vector<std::size_t>& train, const std::vector<double>& query,
                               std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(train.size());
  for (std::size_t i : train) d.emplace_back(squared_distance(x[i], query), i);
  const std::size_t kk = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
  std::map<std::string, std::size_t> votes;
  for (std::size_t r = 0; r < kk; ++r) ++votes[labels[d[r].second]];
  std::size_t best = 0;
  for (const auto& [_, v] : votes) best = std::max(best, v);
  for (std::size_t r = 0; r < kk; ++r)
    if (votes[labels[d[r].second]] == best) return labels[d[r].second];
  throw DataError("knn_predict: no training rows");
}

// Sample-level k-fold nearest-neighbour identification accuracy.
inline CvResult knn_cv(const FeatureRows& x, const std::vector<std::string>& labels, std::size_t k,
                       std::size_t folds, std::uint64_t seed) {
  detail::check_rows(x);
  if (x.size() != labels.size()) throw ShapeError("knn_cv: label count differs from row count");
  if (k == 0) throw ConfigError("knn_cv: k must be >= 1");
  std::map<std::string, std::size_t> per_label;
  for (const auto& l : labels) ++per_label[l];
  if (per_label.size() < 2) throw DataError("knn_cv: need at least 2 subjects");
  for (const auto& [l, n] : per_label)
    if (n < 2) throw DataError("knn_cv: subject " + l + " has a single sample");
  const FoldSplit split = kfold_split(x.size(), folds, seed);
  std::vector<double> acc;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (split.fold_of[i] != f) train.push_back(i);
    const auto test = split.members(f);
    std::size_t hit = 0;
    for (std::size_t i : test) hit += knn_predict(x, labels, train, x[i], k) == labels[i] ? 1 : 0;
    acc.push_back(static_cast<double>(hit) / static_cast<double>(test.size()));
  }
  return detail::finish("accuracy", std::move(acc), seed);
}

}  // namespace modred::eval
