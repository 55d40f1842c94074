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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modred/datapipe/record.hpp"
#include "modred/errors.hpp"
#include "modred/json_util.hpp"
#include "modred/numcore/tensor.hpp"
#include "modred/rng.hpp"

namespace modred::data {

using nc::Tensor;

struct PreprocessConfig {
  double target_fs = 500.0;
  double crop_seconds = 5.0;
  bool normalize = true;

  std::size_t window_samples() const { return static_cast<std::size_t>(std::llround(target_fs * crop_seconds)); }

  void validate() const {
    require(target_fs > 0.0 && std::isfinite(target_fs), "preprocess.target_fs must be positive");
    require(crop_seconds > 0.0 && std::isfinite(crop_seconds), "preprocess.crop_seconds must be positive");
    require(window_samples() >= 1, "preprocess window is empty");
  }

  bool operator==(const PreprocessConfig&) const = default;
};

inline void to_json(json& j, const PreprocessConfig& c) {
  j = {{"target_fs", c.target_fs}, {"crop_seconds", c.crop_seconds}, {"normalize", c.normalize}};
}

inline PreprocessConfig preprocess_config_from_json(const json& j, const std::string& path = "preprocess") {
  StrictObject o(j, path, {"target_fs", "crop_seconds", "normalize"});
  PreprocessConfig c;
  o.get_to("target_fs", c.target_fs);
  o.get_to("crop_seconds", c.crop_seconds);
  o.get_to("normalize", c.normalize);
  c.validate();
  return c;
}

// Number of output samples covering the same duration: round(n * fs_out / fs_in).
inline std::size_t resampled_length(std::size_t n, double fs_in, double fs_out) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * fs_out / fs_in));
}

// Linear interpolation onto t_k = k / fs_out. Grid points past the last input
// sample hold its value.
inline std::vector<double> resample_linear(std::span<const double> x, double fs_in, double fs_out) {
  if (!(fs_in > 0.0) || !(fs_out > 0.0)) throw ConfigError("resample_linear: rates must be positive");
  if (x.size() < 2) throw DataError("resample_linear: need at least 2 samples");
  if (fs_in == fs_out) return {x.begin(), x.end()};
  const std::size_t n_out = resampled_length(x.size(), fs_in, fs_out);
  std::vector<double> out(n_out);
  const double last = static_cast<double>(x.size() - 1);
  for (std::size_t k = 0; k < n_out; ++k) {
    const double pos = static_cast<double>(k) * fs_in / fs_out;
    if (pos >= last) {
      out[k] = x.back();
      continue;
    }
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    out[k] = frac == 0.0 ? x[i] : x[i] + frac * (x[i + 1] - x[i]);
  }
  return out;
}

inline SignalRecord resample_record(const SignalRecord& r, double fs_out) {
  if (r.fs_hz == fs_out) return r;
  SignalRecord out{r.id, r.subject_id, fs_out, {}, r.labels};
  for (const auto& ch : r.channels) out.channels.push_back(resample_linear(ch, r.fs_hz, fs_out));
  return out;
}

// Subtracts each channel's mean; no scaling.
inline Tensor mean_normalize(const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) == 0) throw ShapeError("mean_normalize: expected (C, T) with T >= 1");
  const std::size_t C = x.dim(0), T = x.dim(1);
  std::vector<double> v = x.values();
  for (std::size_t c = 0; c < C; ++c) {
    double m = 0.0;
    for (std::size_t t = 0; t < T; ++t) m += v[c * T + t];
    m /= static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t) v[c * T + t] -= m;
  }
  return Tensor::from(x.shape(), std::move(v));
}

inline std::size_t crop_offset(std::size_t n_samples, std::size_t window, std::uint64_t seed) {
  if (n_samples < window) {
    throw DataError("record has " + std::to_string(n_samples) + " samples, shorter than the " +
                    std::to_string(window) + "-sample window");
  }
  Rng rng(seed);
  return static_cast<std::size_t>(rng.below(n_samples - window + 1));
}

// One shared window position across channels; resamples first when needed.
// Returns (C, crop_seconds * target_fs), mean-normalized if configured.
inline Tensor crop_random(const SignalRecord& record, const PreprocessConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const SignalRecord& r = record.fs_hz == cfg.target_fs ? record : resample_record(record, cfg.target_fs);
  const std::size_t T = cfg.window_samples();
  const std::size_t off = crop_offset(r.n_samples(), T, seed);
  std::vector<double> v;
  v.reserve(r.n_channels() * T);
  for (const auto& ch : r.channels) v.insert(v.end(), ch.begin() + static_cast<std::ptrdiff_t>(off),
                                             ch.begin() + static_cast<std::ptrdiff_t>(off + T));
  Tensor out = Tensor::from({r.n_channels(), T}, std::move(v));
  return cfg.normalize ? mean_normalize(out) : out;
}

// Resamples every record once so that per-step cropping is a slice.
inline std::vector<SignalRecord> prepare_records(const std::vector<SignalRecord>& records,
                                                 const PreprocessConfig& cfg) {
  std::vector<SignalRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(resample_record(r, cfg.target_fs));
  return out;
}

// Per-epoch record order, split into batches of batch_size; the final partial
// batch is kept unless it has fewer than 2 records. Depends only on the
// record count, so a coordinator can follow the schedule without the data.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n_records, std::size_t batch_size,
                                                           std::uint64_t epoch_seed) {
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (n_records < 2) throw DataError("need at least 2 records to form a batch");
  std::vector<std::size_t> order(n_records);
  for (std::size_t i = 0; i < n_records; ++i) order[i] = i;
  Rng rng(derive_seed(epoch_seed, {seed_tag::kShuffle}));
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < n_records; b += batch_size) {
    const std::size_t e = std::min(n_records, b + batch_size);
    if (e - b < 2) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b), order.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return out;
}

struct Batch {
  std::size_t step = 0;                  // index within the epoch
  std::vector<std::size_t> record_index;
  std::vector<std::string> record_ids;
  std::vector<Tensor> windows;           // one (C, T) window per record
};

// Seeded per-epoch stream of preprocessed batches. Crop offsets are keyed by
// (epoch_seed, step, slot), so equal seeds reproduce equal streams.
class BatchIterator {
 public:
  BatchIterator(const std::vector<SignalRecord>& records, std::size_t batch_size, PreprocessConfig cfg,
                std::uint64_t epoch_seed)
      : records_(records),
        cfg_(cfg),
        epoch_seed_(epoch_seed),
        batches_(epoch_batches(records.size(), batch_size, epoch_seed)) {
    cfg_.validate();
  }

  std::size_t num_batches() const { return batches_.size(); }

  std::optional<Batch> next() {
    if (cursor_ >= batches_.size()) return std::nullopt;
    Batch b{cursor_, batches_[cursor_], {}, {}};
    for (std::size_t slot = 0; slot < b.record_index.size(); ++slot) {
      const auto& r = records_[b.record_index[slot]];
      b.record_ids.push_back(r.id);
      b.windows.push_back(crop_random(r, cfg_, derive_seed(epoch_seed_, {seed_tag::kCrop, cursor_, slot})));
    }
    ++cursor_;
    return b;
  }

 private:
  const std::vector<SignalRecord>& records_;
  PreprocessConfig cfg_;
  std::uint64_t epoch_seed_;
  std::vector<std::vector<std::size_t>> batches_;
  std::size_t cursor_ = 0;
};

}  // namespace modred::data
