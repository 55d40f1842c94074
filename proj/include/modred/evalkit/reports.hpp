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
 * @file reports.hpp
 * @brief Model-driven reports: channel similarity matrices, the
 *        cross-channel reconstruction MAE matrix and embedding tables.
 *
 * Every crop and mask is drawn from derive_seed(seed, {kEval, ...}) so a
 * report regenerates identically for a fixed seed.
 */
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "modred/datapipe/preprocess.hpp"
#include "modred/datapipe/record.hpp"
#include "modred/errors.hpp"
#include "modred/evalkit/metrics.hpp"
#include "modred/mae1d/mask.hpp"
#include "modred/mae1d/model.hpp"
#include "modred/rng.hpp"

namespace modred::eval {

namespace fs = std::filesystem;
using Models = std::span<const mae::Mae1dModel>;
using Matrix = std::vector<std::vector<double>>;

inline constexpr std::uint64_t kTagSimilarity = 1;
inline constexpr std::uint64_t kTagRecon = 2;
inline constexpr std::uint64_t kTagEmbed = 3;
inline constexpr std::uint64_t kTagReconMask = 4;

inline std::vector<double> to_vector(const nc::Tensor& t) {
  std::vector<double> v(t.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = t.at(i);
  return v;
}

inline std::vector<double> channel_signal(const nc::Tensor& window, std::size_t c) {
  const std::size_t T = window.dim(1);
  std::vector<double> v(T);
  for (std::size_t t = 0; t < T; ++t) v[t] = window.at(c * T + t);
  return v;
}

// Unmasked CLS embedding of one channel signal.
inline std::vector<double> cls_embedding(const mae::Mae1dModel& model, std::span<const double> signal) {
  const auto x = nc::Tensor::from({signal.size()}, std::vector<double>(signal.begin(), signal.end()));
  return to_vector(model.encode(x).cls());
}

namespace detail {

inline void check_inputs(Models models, const std::vector<data::SignalRecord>& records,
                         const data::PreprocessConfig& pre) {
  if (models.empty()) throw ConfigError("no channel models given");
  if (records.empty()) throw DataError("no records given");
  for (const auto& m : models) {
    if (m.config().signal_len != pre.window_samples()) {
      throw ConfigError("model signal_len " + std::to_string(m.config().signal_len) +
                        " does not match the preprocess window of " + std::to_string(pre.window_samples()));
    }
  }
  for (const auto& r : records) {
    if (r.n_channels() < models.size()) {
      throw DataError("record " + r.id + " has fewer channels than there are models");
    }
  }
}

}  // namespace detail

// Per record and channel, the CLS embedding of one seeded crop.
struct EmbeddingTable {
  std::vector<std::string> ids;
  std::vector<std::string> subjects;
  std::vector<std::size_t> record_index;
  std::vector<std::vector<std::vector<double>>> emb;  // [record][channel][dim]

  std::size_t channels() const { return emb.empty() ? 0 : emb.front().size(); }

  // One row per record: channel c's embedding.
  std::vector<std::vector<double>> channel_rows(std::size_t c) const {
    std::vector<std::vector<double>> out;
    for (const auto& r : emb) out.push_back(r.at(c));
    return out;
  }
};

inline EmbeddingTable embed_records(Models models, const std::vector<data::SignalRecord>& records,
                                    const data::PreprocessConfig& pre, std::uint64_t seed) {
  detail::check_inputs(models, records, pre);
  EmbeddingTable t;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto window = data::crop_random(records[k], pre, derive_seed(seed, {seed_tag::kEval, kTagEmbed, k}));
    std::vector<std::vector<double>> row;
    for (std::size_t c = 0; c < models.size(); ++c) row.push_back(cls_embedding(models[c], channel_signal(window, c)));
    t.ids.push_back(records[k].id);
    t.subjects.push_back(records[k].subject_id);
    t.record_index.push_back(k);
    t.emb.push_back(std::move(row));
  }
  return t;
}

struct SimilarityReport {
  // Lower triangle: mean signal correlation; upper: mean CLS cosine
  // similarity; diagonal 1.
  Matrix matrix;
  std::size_t repeats = 0;
  std::size_t records = 0;
  // Mean of the upper triangle (same record, different channels).
  double same_record_mean = 0.0;
  // Mean cosine between channel i of one record and channel j != i of
  // another record, over the same crops.
  double different_record_mean = 0.0;
};

inline SimilarityReport similarity_report(Models models, const std::vector<data::SignalRecord>& records,
                                          const data::PreprocessConfig& pre, std::size_t repeats,
                                          std::uint64_t seed) {
  detail::check_inputs(models, records, pre);
  if (repeats == 0) throw ConfigError("similarity_report: repeats must be >= 1");
  const std::size_t C = models.size(), K = records.size();
  SimilarityReport rep;
  rep.matrix.assign(C, std::vector<double>(C, 0.0));
  rep.repeats = repeats;
  rep.records = K;
  double diff_sum = 0.0;
  std::size_t diff_n = 0;
  for (std::size_t r = 0; r < repeats; ++r) {
    std::vector<std::vector<std::vector<double>>> emb(K);
    for (std::size_t k = 0; k < K; ++k) {
      const auto window =
          data::crop_random(records[k], pre, derive_seed(seed, {seed_tag::kEval, kTagSimilarity, r, k}));
      std::vector<std::vector<double>> sig(C);
      for (std::size_t c = 0; c < C; ++c) {
        sig[c] = channel_signal(window, c);
        emb[k].push_back(cls_embedding(models[c], sig[c]));
      }
      for (std::size_t i = 0; i < C; ++i) {
        for (std::size_t j = i + 1; j < C; ++j) {
          rep.matrix[j][i] += pearson_corr(sig[i], sig[j]);
          rep.matrix[i][j] += cosine_sim(emb[k][i], emb[k][j]);
        }
      }
    }
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t l = 0; l < K; ++l) {
        if (k == l) continue;
        for (std::size_t i = 0; i < C; ++i)
          for (std::size_t j = 0; j < C; ++j) {
            if (i == j) continue;
            diff_sum += cosine_sim(emb[k][i], emb[l][j]);
            ++diff_n;
          }
      }
  }
  const double n = static_cast<double>(repeats * K);
  double upper = 0.0;
  for (std::size_t i = 0; i < C; ++i) {
    rep.matrix[i][i] = 1.0;
    for (std::size_t j = i + 1; j < C; ++j) {
      rep.matrix[i][j] /= n;
      rep.matrix[j][i] /= n;
      upper += rep.matrix[i][j];
    }
  }
  if (C > 1) rep.same_record_mean = upper / static_cast<double>(C * (C - 1) / 2);
  if (diff_n > 0) rep.different_record_mean = diff_sum / static_cast<double>(diff_n);
  return rep;
}

// Entry (i, j): MAE of channel j's decoder reconstructing channel j from
// channel i's masked encoding, over the full window, averaged over records.
struct ReconMaeMatrix {
  Matrix matrix;
  std::size_t records = 0;
  double mask_ratio = 0.75;

  double diagonal_mean() const {
    double s = 0.0;
    for (std::size_t i = 0; i < matrix.size(); ++i) s += matrix[i][i];
    return s / static_cast<double>(matrix.size());
  }
  double off_diagonal_mean() const {
    const std::size_t C = matrix.size();
    if (C < 2) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < C; ++i)
      for (std::size_t j = 0; j < C; ++j)
        if (i != j) s += matrix[i][j];
    return s / static_cast<double>(C * (C - 1));
  }
};

inline double mean_abs_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("mean_abs_error: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

// Mask used for source channel c of record k in recon_mae_report.
inline mae::MaskPlan report_mask(const mae::ModelConfig& cfg, double mask_ratio, std::uint64_t seed, std::size_t k,
                                 std::size_t c) {
  return mae::random_mask(cfg.num_patches(), mask_ratio, derive_seed(seed, {seed_tag::kEval, kTagReconMask, k, c}));
}

inline ReconMaeMatrix recon_mae_report(Models models, const std::vector<data::SignalRecord>& records,
                                       const data::PreprocessConfig& pre, double mask_ratio, std::uint64_t seed) {
  detail::check_inputs(models, records, pre);
  const std::size_t C = models.size(), K = records.size();
  ReconMaeMatrix rep{Matrix(C, std::vector<double>(C, 0.0)), K, mask_ratio};
  for (std::size_t k = 0; k < K; ++k) {
    const auto window = data::crop_random(records[k], pre, derive_seed(seed, {seed_tag::kEval, kTagRecon, k}));
    for (std::size_t i = 0; i < C; ++i) {
      const auto plan = report_mask(models[i].config(), mask_ratio, seed, k, i);
      const auto src = channel_signal(window, i);
      const auto enc = models[i].encode(nc::Tensor::from({src.size()}, src), &plan);
      for (std::size_t j = 0; j < C; ++j) {
        const auto rec = to_vector(mae::unpatchify(mae::cross_decode(models[j], enc)));
        rep.matrix[i][j] += mean_abs_error(rec, channel_signal(window, j)) / static_cast<double>(K);
      }
    }
  }
  for (const auto& row : rep.matrix)
    for (double v : row)
      if (!std::isfinite(v)) throw NumericError("recon_mae_report: non-finite MAE");
  return rep;
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// One row per (record, channel): id, subject_id, channel, e0..e{d-1}.
inline void export_embeddings(const EmbeddingTable& t, const fs::path& out_path) {
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw DataError("cannot write " + out_path.string());
  const std::size_t d = t.emb.empty() ? 0 : t.emb.front().front().size();
  f << "id,subject_id,channel";
  for (std::size_t j = 0; j < d; ++j) f << ",e" << j;
  f << '\n';
  for (std::size_t k = 0; k < t.emb.size(); ++k) {
    for (std::size_t c = 0; c < t.emb[k].size(); ++c) {
      f << t.ids[k] << ',' << t.subjects[k] << ',' << c;
      for (double v : t.emb[k][c]) f << ',' << format_real(v);
      f << '\n';
    }
  }
  if (!f) throw DataError("failed writing " + out_path.string());
}

inline void export_embeddings(Models models, const std::vector<data::SignalRecord>& records,
                              const data::PreprocessConfig& pre, std::uint64_t seed, const fs::path& out_path) {
  export_embeddings(embed_records(models, records, pre, seed), out_path);
}

}  // namespace modred::eval
