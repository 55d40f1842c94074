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
 * @file roles.hpp
 * @brief Coordinator and worker loops of distributed training.
 *
 * Session:
 *
 *     worker -> HELLO(channel)                       once
 *     coord  -> EPOCH(epoch, seed, w_align, w_rec)   per epoch, to all
 *       per step s (align on):
 *         worker -> EMB(s)      CLS rows of its batch
 *         coord  -> GRAD(s)     after EMB(s) from every channel
 *         worker -> DONE(s)     after its optimizer step
 *       per step s (align off):
 *         worker -> DONE(s)
 *     coord  -> SHUTDOWN
 *
 * Step ids are global: epoch * steps_per_epoch + index within the epoch.
 * Any failure is fail-stop: the side that detects it sends ERR to every
 * peer it still has and aborts.
 */
#pragma once

#include <algorithm>
#include <exception>
#include <map>
#include <set>
#include <thread>

#include "modred/disttrain/trainer.hpp"
#include "modred/disttrain/transport.hpp"
#include "modred/disttrain/wire.hpp"

namespace modred::dist {

inline std::uint64_t global_step(std::int64_t epoch, std::size_t steps_per_epoch, std::size_t local) {
  return static_cast<std::uint64_t>(epoch) * steps_per_epoch + local;
}

template <class T>
T expect(Stream& s, const char* context) {
  Message m = recv_message(s);
  if (auto* err = std::get_if<Err>(&m)) throw ProtocolError(std::string("peer aborted: ") + err->reason);
  if (auto* v = std::get_if<T>(&m)) return std::move(*v);
  throw ProtocolError(std::string("unexpected ") + message_name(m) + " while waiting for " + context);
}

// Best-effort ERR broadcast; the connections are closed afterwards.
inline void abort_peers(std::span<const StreamPtr> peers, const std::string& reason) {
  for (const auto& p : peers) {
    if (!p) continue;
    try {
      send_message(*p, Err{reason});
    } catch (const std::exception&) {
    }
    p->close();
  }
}

struct CoordinatorOptions {
  std::int64_t start_epoch = 0;
  std::optional<std::int64_t> stop_epoch;
  fs::path metrics_path;
};

struct CoordinatorResult {
  std::vector<MetricsRow> metrics;
  std::size_t emb_received = 0;
  std::size_t grad_sent = 0;
  std::size_t done_received = 0;
};

// record_ids: ids of the full training set in manifest order (the batch
// schedule depends only on their count; triplets need the ids).
inline CoordinatorResult run_coordinator(const TrainConfig& cfg, const std::vector<std::string>& record_ids,
                                         std::vector<StreamPtr> conns, const CoordinatorOptions& opt = {}) {
  const std::size_t C = cfg.channels;
  CoordinatorResult out;
  try {
    cfg.validate();
    if (conns.size() != C) throw ConfigError("coordinator expects one connection per channel");
    std::vector<StreamPtr> by_channel(C);
    for (auto& conn : conns) {
      const Hello h = expect<Hello>(*conn, "HELLO");
      if (h.channel >= C) throw ProtocolError("HELLO for channel " + std::to_string(h.channel) + " out of range");
      if (by_channel[h.channel]) throw ProtocolError("duplicate HELLO for channel " + std::to_string(h.channel));
      by_channel[h.channel] = conn;
    }
    const std::int64_t stop = opt.stop_epoch ? *opt.stop_epoch : cfg.epochs;
    for (std::int64_t epoch = opt.start_epoch; epoch < stop; ++epoch) {
      const auto w = cfg.weights(epoch);
      const std::uint64_t eseed = cfg.epoch_seed(epoch);
      const EpochBegin eb{static_cast<std::uint32_t>(epoch), eseed, w.w_align, w.w_rec};
      for (auto& c : by_channel) send_message(*c, eb);
      const auto batches = data::epoch_batches(record_ids.size(), cfg.batch_size, eseed);
      double align_sum = 0.0;
      for (std::size_t s = 0; s < batches.size(); ++s) {
        const std::uint64_t step = global_step(epoch, batches.size(), s);
        const std::size_t B = batches[s].size();
        if (cfg.align) {
          std::vector<Tensor> cls;
          for (std::size_t c = 0; c < C; ++c) {
            const Emb e = expect<Emb>(*by_channel[c], "EMB");
            if (e.step != step) {
              throw ProtocolError("EMB for step " + std::to_string(e.step) + " from channel " + std::to_string(c) +
                                  ", expected " + std::to_string(step));
            }
            if (e.rows != B || e.dim != cfg.model.enc_dim) throw ProtocolError("EMB has the wrong shape");
            cls.push_back(Tensor::from({B, e.dim}, e.data));
            ++out.emb_received;
          }
          std::vector<std::string> ids;
          for (auto i : batches[s]) ids.push_back(record_ids[i]);
          const auto ta = obj::assign_triplets(ids, C, triplet_seed(eseed, s), cfg.margin);
          const auto g = obj::alignment_gradients(cls, ta, w.w_align);
          align_sum += g.loss;
          for (std::size_t c = 0; c < C; ++c) {
            Grad gm;
            gm.step = step;
            gm.rows = static_cast<std::uint32_t>(B);
            gm.dim = static_cast<std::uint32_t>(cfg.model.enc_dim);
            gm.data = g.grads[c];
            send_message(*by_channel[c], gm);
            ++out.grad_sent;
          }
        }
        for (std::size_t c = 0; c < C; ++c) {
          const Done d = expect<Done>(*by_channel[c], "DONE");
          if (d.step != step) throw ProtocolError("DONE for the wrong step from channel " + std::to_string(c));
          ++out.done_received;
        }
      }
      MetricsRow row{epoch, global_step(epoch + 1, batches.size(), 0), w.w_align, w.w_rec, std::nullopt,
                     std::nullopt, std::nullopt, nc::cosine_lr(static_cast<int>(epoch), cfg.lr_schedule())};
      if (cfg.align) row.align_loss = align_sum / static_cast<double>(batches.size());
      out.metrics.push_back(row);
      if (!opt.metrics_path.empty()) write_metrics(opt.metrics_path, out.metrics);
    }
    for (auto& c : by_channel) send_message(*c, Shutdown{});
    for (auto& c : by_channel) c->close();
  } catch (const std::exception& e) {
    log::error(std::string("coordinator: ") + e.what());
    abort_peers(conns, e.what());
    throw;
  }
  return out;
}

// Accepts cfg.channels workers on the listener, then coordinates.
inline CoordinatorResult serve_coordinator(const TrainConfig& cfg, const std::vector<std::string>& record_ids,
                                           TcpListener& listener, const CoordinatorOptions& opt = {}) {
  std::vector<StreamPtr> conns;
  for (std::size_t c = 0; c < cfg.channels; ++c) conns.push_back(listener.accept());
  return run_coordinator(cfg, record_ids, std::move(conns), opt);
}

struct WorkerResult {
  ChannelState state;
  std::vector<MetricsRow> metrics;
  std::size_t steps = 0;
};

inline WorkerResult run_worker(const TrainConfig& cfg, const data::PreprocessConfig& pre, std::size_t channel,
                               const std::vector<data::SignalRecord>& records, StreamPtr conn,
                               const RunOptions& opt = {}) {
  std::optional<WorkerResult> out;
  try {
    cfg.validate();
    pre.validate();
    if (channel >= cfg.channels) throw ConfigError("worker channel out of range");
    if (pre.window_samples() != cfg.model.signal_len) throw ConfigError("preprocess window does not match the model");
    check_records(records, cfg.channels);
    std::int64_t next_epoch = 0;
    if (opt.resume) {
      auto [state, next] = load_channel(cfg.checkpoint_dir, channel, cfg);
      out.emplace(WorkerResult{std::move(state), {}, 0});
      next_epoch = next;
      if (!opt.metrics_path.empty() && fs::exists(opt.metrics_path)) {
        for (auto& r : read_metrics(opt.metrics_path)) {
          if (r.epoch < next_epoch) out->metrics.push_back(r);
        }
      }
    } else {
      out.emplace(WorkerResult{fresh_channel(cfg, channel), {}, 0});
    }
    auto& st = out->state;
    auto params = st.model.parameters();
    send_message(*conn, Hello{static_cast<std::uint8_t>(channel)});
    for (;;) {
      Message m = recv_message(*conn);
      if (std::holds_alternative<Shutdown>(m)) break;
      if (auto* err = std::get_if<Err>(&m)) throw ProtocolError("coordinator aborted: " + err->reason);
      auto* eb = std::get_if<EpochBegin>(&m);
      if (!eb) throw ProtocolError(std::string("unexpected ") + message_name(m) + " between epochs");
      const std::int64_t epoch = eb->epoch;
      if (epoch != next_epoch) {
        throw ProtocolError("coordinator started epoch " + std::to_string(epoch) + ", worker expected " +
                            std::to_string(next_epoch));
      }
      const double lr = nc::cosine_lr(static_cast<int>(epoch), cfg.lr_schedule());
      data::BatchIterator it(records, cfg.batch_size, pre, eb->epoch_seed);
      const std::size_t n_steps = it.num_batches();
      double rec_sum = 0.0;
      while (auto batch = it.next()) {
        const std::uint64_t step = global_step(epoch, n_steps, batch->step);
        st.model.zero_grad();
        const ChannelForward f = channel_forward(st.model, *batch, channel, eb->epoch_seed);
        rec_sum += f.rec_loss.item();
        if (cfg.align) {
          Emb e;
          e.step = step;
          e.rows = static_cast<std::uint32_t>(f.cls.dim(0));
          e.dim = static_cast<std::uint32_t>(f.cls.dim(1));
          e.data = f.cls.values();
          send_message(*conn, e);
        }
        backward_reconstruction(f, eb->w_rec);
        if (cfg.align) {
          const Grad g = expect<Grad>(*conn, "GRAD");
          if (g.step != step) {
            throw ProtocolError("GRAD for step " + std::to_string(g.step) + ", pending step is " + std::to_string(step));
          }
          if (g.rows != f.cls.dim(0) || g.dim != f.cls.dim(1)) throw ProtocolError("GRAD has the wrong shape");
          backward_alignment(f, g.data);
        }
        nc::adamw_step(params, st.optimizer, lr);
        send_message(*conn, Done{step});
        ++out->steps;
        if (opt.on_step) opt.on_step(epoch, batch->step);
      }
      out->metrics.push_back({epoch, st.optimizer.step_count, eb->w_align, eb->w_rec,
                              rec_sum / static_cast<double>(n_steps), std::nullopt, std::nullopt, lr});
      next_epoch = epoch + 1;
      if (!cfg.checkpoint_dir.empty()) save_channel(cfg.checkpoint_dir, channel, st, cfg, next_epoch);
      if (!opt.metrics_path.empty()) write_metrics(opt.metrics_path, out->metrics);
    }
    conn->close();
  } catch (const std::exception& e) {
    log::error("worker " + std::to_string(channel) + ": " + e.what());
    abort_peers(std::span<const StreamPtr>(&conn, 1), e.what());
    throw;
  }
  return std::move(*out);
}

struct LocalResult {
  std::vector<ChannelState> channels;
  std::vector<MetricsRow> metrics;  // coordinator rows with the workers' mean reconstruction loss
  CoordinatorResult coordinator;
};

// Coordinator in the calling thread and one worker thread per channel.
// Transport chooses in-memory pipes (false) or loopback TCP (true).
inline LocalResult run_local(const TrainConfig& cfg, const data::PreprocessConfig& pre,
                             const std::vector<data::SignalRecord>& records, bool tcp, const RunOptions& opt = {}) {
  const std::size_t C = cfg.channels;
  std::vector<StreamPtr> coord_side(C), worker_side(C);
  std::unique_ptr<TcpListener> listener;
  if (tcp) {
    listener = std::make_unique<TcpListener>(Endpoint{"127.0.0.1", 0});
  } else {
    for (std::size_t c = 0; c < C; ++c) std::tie(coord_side[c], worker_side[c]) = memory_stream_pair();
  }
  std::vector<std::optional<WorkerResult>> results(C);
  std::vector<std::exception_ptr> errors(C);
  std::vector<std::thread> threads;
  for (std::size_t c = 0; c < C; ++c) {
    threads.emplace_back([&, c] {
      try {
        StreamPtr s = tcp ? tcp_connect({"127.0.0.1", listener->port()}) : worker_side[c];
        RunOptions wopt;
        wopt.resume = opt.resume;
        wopt.stop_epoch = opt.stop_epoch;
        results[c] = run_worker(cfg, pre, c, records, s, wopt);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  std::exception_ptr coord_error;
  LocalResult out;
  try {
    if (tcp) {
      for (std::size_t c = 0; c < C; ++c) coord_side[c] = listener->accept();
    }
    std::vector<std::string> ids;
    for (const auto& r : records) ids.push_back(r.id);
    CoordinatorOptions copt;
    copt.stop_epoch = opt.stop_epoch;
    if (opt.resume) copt.start_epoch = load_channel(cfg.checkpoint_dir, 0, cfg).second;
    out.coordinator = run_coordinator(cfg, ids, coord_side, copt);
  } catch (...) {
    coord_error = std::current_exception();
    for (auto& s : coord_side) {
      if (s) s->close();
    }
    // Resets connections that were queued but never accepted.
    listener.reset();
  }
  for (auto& t : threads) t.join();
  if (coord_error) std::rethrow_exception(coord_error);
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (auto& r : results) out.channels.push_back(std::move(r->state));
  std::vector<MetricsRow> prior;
  if (opt.resume && !opt.metrics_path.empty() && fs::exists(opt.metrics_path)) {
    for (auto& r : read_metrics(opt.metrics_path)) {
      if (!out.coordinator.metrics.empty() && r.epoch < out.coordinator.metrics.front().epoch) prior.push_back(r);
    }
  }
  out.metrics = prior;
  for (std::size_t i = 0; i < out.coordinator.metrics.size(); ++i) {
    MetricsRow row = out.coordinator.metrics[i];
    double rec = 0.0;
    for (const auto& r : results) rec += *r->metrics[i].rec_loss / static_cast<double>(C);
    row.rec_loss = rec;
    row.align_loss = row.align_loss.value_or(0.0);
    row.total_loss = obj::combined_loss(rec, *row.align_loss, obj::CurriculumWeights{row.w_align, row.w_rec});
    out.metrics.push_back(row);
  }
  if (!opt.metrics_path.empty()) write_metrics(opt.metrics_path, out.metrics);
  return out;
}

}  // namespace modred::dist
