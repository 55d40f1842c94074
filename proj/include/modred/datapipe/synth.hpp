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
 * @file synth.hpp
 * @brief Synthetic multi-lead recordings driven by a latent cardiac state.
 *
 * Each subject owns a latent trajectory H(t) in R^k: a few harmonics of a
 * subject-specific beat rate plus a Gaussian spike train at every beat (the
 * R-peak analog). Subjects flagged "mi" carry an extra delayed bump. Every
 * channel is a fixed linear read-out P_i . H(t) plus white noise.
 *
 * With 12 channels, I, III and V1-V6 are independent read-outs and the
 * remaining limb leads are derived before noise:
 *
 *     II = I + III,  aVR = -(I + II) / 2,  aVL = (I - III) / 2,  aVF = (II + III) / 2
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "modred/datapipe/record.hpp"
#include "modred/errors.hpp"
#include "modred/json_util.hpp"
#include "modred/rng.hpp"

namespace modred::data {

struct SyntheticHeartConfig {
  std::size_t n_subjects = 5;
  std::size_t records_per_subject = 4;
  std::size_t latent_dim = 8;
  std::size_t channels = 12;
  std::size_t harmonics = 3;
  double beat_rate_min_hz = 0.8;
  double beat_rate_max_hz = 1.8;
  double spike_width_s = 0.04;
  double phase_jitter_cycles = 0.05;  // per-record phase offset, uniform in +-this
  double noise_std = 0.02;
  double fs_hz = 50.0;
  double duration_s = 10.0;
  std::uint64_t rng_seed = 0;

  std::size_t n_samples() const { return static_cast<std::size_t>(std::llround(fs_hz * duration_s)); }

  void validate() const {
    require(n_subjects >= 1, "synth.n_subjects must be >= 1");
    require(records_per_subject >= 1, "synth.records_per_subject must be >= 1");
    require(latent_dim >= 1, "synth.latent_dim must be >= 1");
    require(channels >= 1, "synth.channels must be >= 1");
    require(harmonics >= 1, "synth.harmonics must be >= 1");
    require(beat_rate_min_hz > 0.0 && beat_rate_max_hz > beat_rate_min_hz,
            "synth.beat_rate_min_hz must be positive and below beat_rate_max_hz");
    require(spike_width_s > 0.0, "synth.spike_width_s must be positive");
    require(phase_jitter_cycles >= 0.0, "synth.phase_jitter_cycles must be >= 0");
    require(noise_std >= 0.0, "synth.noise_std must be >= 0");
    require(fs_hz > 0.0 && duration_s > 0.0 && n_samples() >= 2, "synth.fs_hz and duration_s must give >= 2 samples");
  }

  bool operator==(const SyntheticHeartConfig&) const = default;
};

inline void to_json(json& j, const SyntheticHeartConfig& c) {
  j = {{"n_subjects", c.n_subjects},
       {"records_per_subject", c.records_per_subject},
       {"latent_dim", c.latent_dim},
       {"channels", c.channels},
       {"harmonics", c.harmonics},
       {"beat_rate_min_hz", c.beat_rate_min_hz},
       {"beat_rate_max_hz", c.beat_rate_max_hz},
       {"spike_width_s", c.spike_width_s},
       {"phase_jitter_cycles", c.phase_jitter_cycles},
       {"noise_std", c.noise_std},
       {"fs_hz", c.fs_hz},
       {"duration_s", c.duration_s},
       {"rng_seed", c.rng_seed}};
}

inline SyntheticHeartConfig synth_config_from_json(const json& j, const std::string& path = "synth") {
  StrictObject o(j, path,
                 {"n_subjects", "records_per_subject", "latent_dim", "channels", "harmonics", "beat_rate_min_hz",
                  "beat_rate_max_hz", "spike_width_s", "phase_jitter_cycles", "noise_std", "fs_hz", "duration_s",
                  "rng_seed"});
  SyntheticHeartConfig c;
  o.get_to("n_subjects", c.n_subjects);
  o.get_to("records_per_subject", c.records_per_subject);
  o.get_to("latent_dim", c.latent_dim);
  o.get_to("channels", c.channels);
  o.get_to("harmonics", c.harmonics);
  o.get_to("beat_rate_min_hz", c.beat_rate_min_hz);
  o.get_to("beat_rate_max_hz", c.beat_rate_max_hz);
  o.get_to("spike_width_s", c.spike_width_s);
  o.get_to("phase_jitter_cycles", c.phase_jitter_cycles);
  o.get_to("noise_std", c.noise_std);
  o.get_to("fs_hz", c.fs_hz);
  o.get_to("duration_s", c.duration_s);
  o.get_to("rng_seed", c.rng_seed);
  c.validate();
  return c;
}

// Latent dynamics of one subject.
struct SubjectDynamics {
  double beat_rate_hz = 1.0;
  std::vector<std::vector<double>> amp;    // [latent][harmonic]
  std::vector<std::vector<double>> phase;  // [latent][harmonic]
  std::vector<double> spike;               // [latent]
  std::vector<double> bump;                // [latent]; all zero unless mi
  bool mi = false;
};

inline constexpr std::uint64_t kSynthSubjectTag = 101;
inline constexpr std::uint64_t kSynthRecordTag = 102;
inline constexpr std::uint64_t kSynthProjectionTag = 103;

// Beat rates are stratified over [min, max) so that subjects stay distinct.
inline SubjectDynamics subject_dynamics(const SyntheticHeartConfig& cfg, std::size_t subject) {
  Rng rng(derive_seed(cfg.rng_seed, {kSynthSubjectTag, subject}));
  SubjectDynamics s;
  const double width = (cfg.beat_rate_max_hz - cfg.beat_rate_min_hz) / static_cast<double>(cfg.n_subjects);
  s.beat_rate_hz = cfg.beat_rate_min_hz + width * (static_cast<double>(subject) + rng.uniform(0.2, 0.8));
  s.mi = subject % 2 == 1;
  s.amp.assign(cfg.latent_dim, std::vector<double>(cfg.harmonics));
  s.phase.assign(cfg.latent_dim, std::vector<double>(cfg.harmonics));
  s.spike.resize(cfg.latent_dim);
  s.bump.assign(cfg.latent_dim, 0.0);
  for (std::size_t j = 0; j < cfg.latent_dim; ++j) {
    for (std::size_t h = 0; h < cfg.harmonics; ++h) {
      s.amp[j][h] = rng.normal() / static_cast<double>(h + 1);
      s.phase[j][h] = rng.uniform(0.0, 2 * std::numbers::pi);
    }
    s.spike[j] = 2.0 * rng.normal();
    const double b = rng.normal();
    if (s.mi) s.bump[j] = b;
  }
  return s;
}

// Read-out vectors for the independent channels (rows, each of latent_dim).
inline std::vector<std::vector<double>> channel_projections(const SyntheticHeartConfig& cfg, std::size_t count) {
  Rng rng(derive_seed(cfg.rng_seed, {kSynthProjectionTag}));
  const double s = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  std::vector<std::vector<double>> p(count, std::vector<double>(cfg.latent_dim));
  for (auto& row : p)
    for (auto& v : row) v = s * rng.normal();
  return p;
}

// H(t) for one record; phase is in beat cycles.
inline std::vector<std::vector<double>> latent_trajectory(const SyntheticHeartConfig& cfg, const SubjectDynamics& s,
                                                          double phase_cycles) {
  const std::size_t n = cfg.n_samples();
  const double f = s.beat_rate_hz;
  const double period = 1.0 / f;
  const double sigma = cfg.spike_width_s;
  const double bump_delay = 0.3 * period, bump_sigma = 2.5 * sigma;
  std::vector<std::vector<double>> H(cfg.latent_dim, std::vector<double>(n, 0.0));
  for (std::size_t t = 0; t < n; ++t) {
    const double time = static_cast<double>(t) / cfg.fs_hz + phase_cycles * period;
    // Distance to the nearest beat and to the nearest delayed bump.
    const double into = time - std::floor(time / period) * period;
    const double d_beat = std::min(into, period - into);
    double d_bump = std::fabs(into - bump_delay);
    d_bump = std::min(d_bump, period - d_bump);
    const double spike = std::exp(-0.5 * d_beat * d_beat / (sigma * sigma));
    const double bump = std::exp(-0.5 * d_bump * d_bump / (bump_sigma * bump_sigma));
    for (std::size_t j = 0; j < cfg.latent_dim; ++j) {
      double v = s.spike[j] * spike + s.bump[j] * bump;
      for (std::size_t h = 0; h < cfg.harmonics; ++h) {
        v += s.amp[j][h] * std::cos(2 * std::numbers::pi * static_cast<double>(h + 1) * f * time + s.phase[j][h]);
      }
      H[j][t] = v;
    }
  }
  return H;
}

inline std::vector<double> project(const std::vector<double>& p, const std::vector<std::vector<double>>& H) {
  std::vector<double> out(H[0].size(), 0.0);
  for (std::size_t j = 0; j < p.size(); ++j)
    for (std::size_t t = 0; t < out.size(); ++t) out[t] += p[j] * H[j][t];
  return out;
}

// One record's channels before noise.
inline std::vector<std::vector<double>> clean_channels(const SyntheticHeartConfig& cfg,
                                                       const std::vector<std::vector<double>>& H,
                                                       const std::vector<std::vector<double>>& proj) {
  std::vector<std::vector<double>> ch;
  if (cfg.channels != 12) {
    for (std::size_t i = 0; i < cfg.channels; ++i) ch.push_back(project(proj[i], H));
    return ch;
  }
  // proj rows: 0 -> I, 1 -> III, 2..7 -> V1..V6.
  const auto I = project(proj[0], H);
  const auto III = project(proj[1], H);
  const std::size_t n = I.size();
  std::vector<double> II(n), aVR(n), aVL(n), aVF(n);
  for (std::size_t t = 0; t < n; ++t) {
    II[t] = I[t] + III[t];
    aVR[t] = -(I[t] + II[t]) / 2;
    aVL[t] = (I[t] - III[t]) / 2;
    aVF[t] = (II[t] + III[t]) / 2;
  }
  ch = {I, II, III, aVR, aVL, aVF};
  for (std::size_t v = 0; v < 6; ++v) ch.push_back(project(proj[2 + v], H));
  return ch;
}

inline std::vector<SignalRecord> synth_generate(const SyntheticHeartConfig& cfg) {
  cfg.validate();
  const auto proj = channel_projections(cfg, cfg.channels == 12 ? 8 : cfg.channels);
  std::vector<SignalRecord> out;
  out.reserve(cfg.n_subjects * cfg.records_per_subject);
  for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
    const auto dyn = subject_dynamics(cfg, s);
    const std::string subject = "s" + std::to_string(s);
    for (std::size_t r = 0; r < cfg.records_per_subject; ++r) {
      Rng rng(derive_seed(cfg.rng_seed, {kSynthRecordTag, s, r}));
      const double phase = rng.uniform(-cfg.phase_jitter_cycles, cfg.phase_jitter_cycles);
      SignalRecord rec;
      rec.id = subject + "_r" + std::to_string(r);
      rec.subject_id = subject;
      rec.fs_hz = cfg.fs_hz;
      rec.labels["mi"] = dyn.mi ? "1" : "0";
      rec.channels = clean_channels(cfg, latent_trajectory(cfg, dyn, phase), proj);
      if (cfg.noise_std > 0.0) {
        for (auto& ch : rec.channels)
          for (auto& v : ch) v += rng.normal(0.0, cfg.noise_std);
      }
      out.push_back(std::move(rec));
    }
  }
  return out;
}

// max_t |II(t) - (I(t) + III(t))| for a record in standard 12-lead order.
inline double einthoven_residual(const SignalRecord& r) {
  if (r.n_channels() < 3) throw DataError("einthoven_residual: record " + r.id + " has fewer than 3 channels");
  double worst = 0.0;
  for (std::size_t t = 0; t < r.n_samples(); ++t) {
    worst = std::max(worst, std::fabs(r.channels[kLeadII][t] - (r.channels[kLeadI][t] + r.channels[kLeadIII][t])));
  }
  return worst;
}

}  // namespace modred::data
