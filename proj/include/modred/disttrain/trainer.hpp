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
 * @file trainer.hpp
 * @brief Per-step channel computation shared by both training modes, the
 *        single-process reference trainer, metrics log and checkpoint sets.
 *
 * Every random choice in a step is a function of (master_seed, epoch, step,
 * channel, slot), and each model's gradient is assembled in the same order
 * in both modes (reconstruction term first, then the alignment term), so the
 * reference and distributed runs produce matching weights.
 */
#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "modred/datapipe/preprocess.hpp"
#include "modred/datapipe/record.hpp"
#include "modred/disttrain/config.hpp"
#include "modred/errors.hpp"
#include "modred/log.hpp"
#include "modred/mae1d/checkpoint.hpp"
#include "modred/mae1d/mask.hpp"
#include "modred/mae1d/model.hpp"
#include "modred/numcore/ops.hpp"
#include "modred/numcore/optim.hpp"
#include "modred/objectives/losses.hpp"
#include "modred/objectives/triplets.hpp"

namespace modred::dist {

namespace fs = std::filesystem;
using nc::Tensor;

// One row of the per-epoch metrics log. Fields a role cannot observe are
// left empty (the coordinator never sees reconstruction losses; a worker
// never sees the alignment loss).
struct MetricsRow {
  std::int64_t epoch = 0;
  std::uint64_t step = 0;  // global optimizer steps completed at epoch end
  double w_align = 0.0;
  double w_rec = 1.0;
  std::optional<double> rec_loss;
  std::optional<double> align_loss;
  std::optional<double> total_loss;
  double lr = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

inline constexpr const char* kMetricsHeader = "epoch,step,w_align,w_rec,rec_loss,align_loss,total_loss,lr";

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string metrics_line(const MetricsRow& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  std::ostringstream os;
  os << r.epoch << ',' << r.step << ',' << format_real(r.w_align) << ',' << format_real(r.w_rec) << ','
     << opt(r.rec_loss) << ',' << opt(r.align_loss) << ',' << opt(r.total_loss) << ',' << format_real(r.lr);
  return os.str();
}

inline void write_metrics(const fs::path& path, const std::vector<MetricsRow>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write metrics log " + path.string());
  f << kMetricsHeader << '\n';
  for (const auto& r : rows) f << metrics_line(r) << '\n';
  if (!f) throw DataError("write failed: " + path.string());
}

inline std::vector<MetricsRow> read_metrics(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw MissingFileError("metrics log not found: " + path.string());
  std::string line;
  if (!std::getline(f, line) || line != kMetricsHeader) throw DataError("metrics log has an unexpected header");
  std::vector<MetricsRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 8) throw DataError("metrics log row has " + std::to_string(cells.size()) + " fields");
    auto opt = [](const std::string& s) { return s.empty() ? std::optional<double>() : std::stod(s); };
    MetricsRow r;
    r.epoch = std::stoll(cells[0]);
    r.step = std::stoull(cells[1]);
    r.w_align = std::stod(cells[2]);
    r.w_rec = std::stod(cells[3]);
    r.rec_loss = opt(cells[4]);
    r.align_loss = opt(cells[5]);
    r.total_loss = opt(cells[6]);
    r.lr = std::stod(cells[7]);
    rows.push_back(r);
  }
  return rows;
}

inline std::uint64_t mask_seed(std::uint64_t epoch_seed, std::uint64_t step, std::size_t channel, std::size_t slot) {
  return derive_seed(epoch_seed, {seed_tag::kMask, step, channel, slot});
}

inline std::uint64_t triplet_seed(std::uint64_t epoch_seed, std::uint64_t step) {
  return derive_seed(epoch_seed, {seed_tag::kTriplet, step});
}

// Forward pass of one channel model over a batch: masked encode and decode
// of every window's channel row.
struct ChannelForward {
  Tensor rec_loss;  // scalar, mean over the batch
  Tensor cls;       // (B, enc_dim), row b is sample b's CLS embedding
};

inline Tensor channel_row(const Tensor& window, std::size_t channel) {
  if (window.rank() != 2 || channel >= window.dim(0)) {
    throw DataError("window has no channel " + std::to_string(channel));
  }
  return nc::reshape(nc::slice_rows(window, channel, channel + 1), {window.dim(1)});
}

inline ChannelForward channel_forward(const mae::Mae1dModel& model, const data::Batch& batch, std::size_t channel,
                                      std::uint64_t epoch_seed) {
  const auto& cfg = model.config();
  std::vector<Tensor> cls_rows;
  Tensor acc;
  for (std::size_t slot = 0; slot < batch.windows.size(); ++slot) {
    const Tensor signal = channel_row(batch.windows[slot], channel);
    const auto plan = mae::random_mask(cfg.num_patches(), cfg.mask_ratio, mask_seed(epoch_seed, batch.step, channel, slot));
    const auto enc = model.encode(signal, &plan);
    const Tensor pred = model.decode(enc);
    const Tensor l = obj::signal_reconstruction_loss(signal, pred, plan, cfg.loss_masked_only);
    acc = acc.defined() ? nc::add(acc, l) : l;
    cls_rows.push_back(enc.cls());
  }
  return {nc::scale(acc, 1.0 / static_cast<double>(batch.windows.size())), nc::concat_rows(cls_rows)};
}

// Backward of the reconstruction term into the model's parameter grads.
inline void backward_reconstruction(const ChannelForward& f, double w_rec) {
  if (w_rec != 0.0) nc::scale(f.rec_loss, w_rec).backward();
}

// Backward of an externally computed alignment gradient G at the CLS
// embeddings: d/dθ sum(cls * G).
inline void backward_alignment(const ChannelForward& f, std::span<const double> grad) {
  if (grad.size() != f.cls.numel()) throw ProtocolError("alignment gradient has the wrong size");
  const Tensor g = Tensor::from(f.cls.shape(), std::vector<double>(grad.begin(), grad.end()));
  nc::sum(nc::mul(f.cls, g)).backward();
}

inline fs::path checkpoint_path(const fs::path& dir, std::size_t channel) {
  return dir / ("channel_" + std::to_string(channel) + ".mr1d");
}

// The per-channel state a trainer owns.
struct ChannelState {
  mae::Mae1dModel model;
  nc::AdamWState optimizer;
};

inline ChannelState fresh_channel(const TrainConfig& cfg, std::size_t channel) {
  mae::Mae1dModel m(cfg.model, cfg.init_seed(channel));
  nc::AdamWState opt(cfg.adamw, m.parameters());
  return {std::move(m), std::move(opt)};
}

inline void save_channel(const fs::path& dir, std::size_t channel, const ChannelState& s, const TrainConfig& cfg,
                         std::int64_t next_epoch) {
  fs::create_directories(dir);
  mae::TrainingPosition pos{static_cast<std::uint32_t>(channel), next_epoch, cfg.epochs, s.optimizer.step_count,
                            cfg.master_seed};
  // Write-then-rename so an interrupted save never leaves a torn file.
  const fs::path final_path = checkpoint_path(dir, channel);
  const fs::path tmp = final_path.string() + ".tmp";
  mae::save_checkpoint(tmp, s.model, s.optimizer, pos);
  fs::rename(tmp, final_path);
}

// Loads channel's checkpoint and checks it belongs to this run.
inline std::pair<ChannelState, std::int64_t> load_channel(const fs::path& dir, std::size_t channel,
                                                          const TrainConfig& cfg) {
  auto ck = mae::load_checkpoint(checkpoint_path(dir, channel));
  if (!(ck.model.config() == cfg.model)) throw CheckpointError("checkpoint model config differs from the run config");
  if (ck.position.channel != channel) throw CheckpointError("checkpoint belongs to another channel");
  if (ck.position.total_epochs != cfg.epochs || ck.position.master_seed != cfg.master_seed) {
    throw CheckpointError("checkpoint was written by a run with different epochs or seed");
  }
  return {ChannelState{std::move(ck.model), std::move(ck.optimizer)}, ck.position.next_epoch};
}

struct RunOptions {
  // Start from the checkpoints in cfg.checkpoint_dir.
  bool resume = false;
  // Stop after this many epochs in total (exclusive end); unset runs to cfg.epochs.
  std::optional<std::int64_t> stop_epoch;
  // Where to write metrics.csv; empty skips the file.
  fs::path metrics_path;
  // Called after every optimizer step (tests use it to watch progress).
  std::function<void(std::int64_t epoch, std::size_t step)> on_step;
};

struct ReferenceResult {
  std::vector<ChannelState> channels;
  std::vector<MetricsRow> metrics;
};

inline void check_records(const std::vector<data::SignalRecord>& records, std::size_t channels) {
  if (records.size() < 2) throw DataError("training needs at least 2 records");
  for (const auto& r : records) {
    if (r.n_channels() < channels) {
      throw DataError("record " + r.id + " has " + std::to_string(r.n_channels()) + " channels, run needs " +
                      std::to_string(channels));
    }
  }
}

inline std::int64_t end_epoch(const TrainConfig& cfg, const RunOptions& opt) {
  const std::int64_t e = opt.stop_epoch ? *opt.stop_epoch : cfg.epochs;
  if (e < 0 || e > cfg.epochs) throw ConfigError("stop_epoch outside [0, epochs]");
  return e;
}

// Single-process training of all channel models. records must already be at
// pre.target_fs (see data::prepare_records) or they are resampled per crop.
inline ReferenceResult train_reference(const TrainConfig& cfg, const data::PreprocessConfig& pre,
                                       const std::vector<data::SignalRecord>& records, const RunOptions& opt = {}) {
  cfg.validate();
  pre.validate();
  if (pre.window_samples() != cfg.model.signal_len) {
    throw ConfigError("preprocess window of " + std::to_string(pre.window_samples()) +
                      " samples does not match model.signal_len " + std::to_string(cfg.model.signal_len));
  }
  check_records(records, cfg.channels);
  const std::size_t C = cfg.channels;

  ReferenceResult out;
  std::int64_t start = 0;
  if (opt.resume) {
    for (std::size_t c = 0; c < C; ++c) {
      auto [state, next] = load_channel(cfg.checkpoint_dir, c, cfg);
      if (c > 0 && next != start) throw CheckpointError("channel checkpoints disagree on the next epoch");
      start = next;
      out.channels.push_back(std::move(state));
    }
    if (!opt.metrics_path.empty() && fs::exists(opt.metrics_path)) {
      for (auto& r : read_metrics(opt.metrics_path)) {
        if (r.epoch < start) out.metrics.push_back(r);
      }
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) out.channels.push_back(fresh_channel(cfg, c));
  }

  std::vector<std::vector<Tensor>> params(C);
  for (std::size_t c = 0; c < C; ++c) params[c] = out.channels[c].model.parameters();

  const std::int64_t stop = end_epoch(cfg, opt);
  for (std::int64_t epoch = start; epoch < stop; ++epoch) {
    const auto w = cfg.weights(epoch);
    const double lr = nc::cosine_lr(static_cast<int>(epoch), cfg.lr_schedule());
    const std::uint64_t eseed = cfg.epoch_seed(epoch);
    data::BatchIterator it(records, cfg.batch_size, pre, eseed);
    double rec_sum = 0.0, align_sum = 0.0, total_sum = 0.0;
    std::size_t steps = 0;
    while (auto batch = it.next()) {
      std::vector<ChannelForward> fwd;
      double rec_mean = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        out.channels[c].model.zero_grad();
        fwd.push_back(channel_forward(out.channels[c].model, *batch, c, eseed));
        rec_mean += fwd.back().rec_loss.item() / static_cast<double>(C);
        backward_reconstruction(fwd.back(), w.w_rec);
      }
      double align = 0.0;
      if (cfg.align) {
        const auto ta = obj::assign_triplets(batch->record_ids, C, triplet_seed(eseed, batch->step), cfg.margin);
        std::vector<Tensor> cls;
        for (const auto& f : fwd) cls.push_back(f.cls.detach());
        const auto g = obj::alignment_gradients(cls, ta, w.w_align);
        align = g.loss;
        for (std::size_t c = 0; c < C; ++c) backward_alignment(fwd[c], g.grads[c]);
      }
      fwd.clear();
      for (std::size_t c = 0; c < C; ++c) nc::adamw_step(params[c], out.channels[c].optimizer, lr);
      const double total = obj::combined_loss(rec_mean, align, w);
      if (!std::isfinite(total)) throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
      rec_sum += rec_mean;
      align_sum += align;
      total_sum += total;
      ++steps;
      if (opt.on_step) opt.on_step(epoch, batch->step);
    }
    const double n = static_cast<double>(steps);
    out.metrics.push_back({epoch, out.channels[0].optimizer.step_count, w.w_align, w.w_rec, rec_sum / n,
                           align_sum / n, total_sum / n, lr});
    log::info("epoch " + std::to_string(epoch) + " rec " + format_real(rec_sum / n) + " align " +
              format_real(align_sum / n));
    if (!cfg.checkpoint_dir.empty()) {
      for (std::size_t c = 0; c < C; ++c) save_channel(cfg.checkpoint_dir, c, out.channels[c], cfg, epoch + 1);
    }
    if (!opt.metrics_path.empty()) write_metrics(opt.metrics_path, out.metrics);
  }
  return out;
}

}  // namespace modred::dist
