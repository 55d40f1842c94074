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

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "modred/errors.hpp"
#include "modred/numcore/ops.hpp"
#include "modred/objectives/losses.hpp"
#include "modred/rng.hpp"

namespace modred::obj {

// One embedding in a batch: sample b (a record) seen through channel c.
struct EmbeddingRef {
  std::size_t sample = 0;
  std::size_t channel = 0;

  bool operator==(const EmbeddingRef&) const = default;
};

struct Triplet {
  EmbeddingRef anchor;
  EmbeddingRef positive;  // same sample, other channel
  EmbeddingRef negative;  // other record, any channel
  bool operator==(const Triplet&) const = default;
};

// Anchors enumerate the batch sample-major: index b * channels + c.
struct TripletAssignment {
  std::size_t samples = 0;
  std::size_t channels = 0;
  std::vector<Triplet> triplets;
  double margin = kDefaultMargin;

  bool operator==(const TripletAssignment&) const = default;
};

inline TripletAssignment assign_triplets(std::span<const std::string> record_ids, std::size_t channels,
                                         std::uint64_t seed, double margin = kDefaultMargin) {
  const std::size_t B = record_ids.size();
  if (channels < 2) throw ConfigError("assign_triplets: alignment needs at least two channels");
  if (std::set<std::string>(record_ids.begin(), record_ids.end()).size() < 2) {
    throw DataError("assign_triplets: batch needs at least two distinct record ids");
  }
  Rng rng(seed);
  TripletAssignment out{B, channels, {}, margin};
  out.triplets.reserve(B * channels);
  std::vector<std::size_t> others;
  for (std::size_t b = 0; b < B; ++b) {
    others.clear();
    for (std::size_t o = 0; o < B; ++o) {
      if (record_ids[o] != record_ids[b]) others.push_back(o);
    }
    for (std::size_t c = 0; c < channels; ++c) {
      Triplet t;
      t.anchor = {b, c};
      std::size_t pc = static_cast<std::size_t>(rng.below(channels - 1));
      if (pc >= c) ++pc;
      t.positive = {b, pc};
      t.negative = {others[rng.below(others.size())], static_cast<std::size_t>(rng.below(channels))};
      out.triplets.push_back(t);
    }
  }
  return out;
}

// Triplet loss over per-channel (B, d) embedding matrices.
inline Tensor alignment_loss(std::span<const Tensor> per_channel, const TripletAssignment& ta) {
  if (per_channel.size() != ta.channels) {
    throw ShapeError("alignment_loss: expected " + std::to_string(ta.channels) + " channel matrices, got " +
                     std::to_string(per_channel.size()));
  }
  for (const auto& m : per_channel) {
    if (m.rank() != 2 || m.dim(0) != ta.samples || m.shape() != per_channel[0].shape()) {
      throw ShapeError("alignment_loss: every channel matrix must be (" + std::to_string(ta.samples) + ", d)");
    }
  }
  // Row c * B + b of the stack is sample b in channel c.
  const Tensor stacked = nc::concat_rows(per_channel);
  auto flat = [&](const EmbeddingRef& r) { return r.channel * ta.samples + r.sample; };
  std::vector<std::size_t> ia, ip, in;
  for (const auto& t : ta.triplets) {
    ia.push_back(flat(t.anchor));
    ip.push_back(flat(t.positive));
    in.push_back(flat(t.negative));
  }
  return triplet_loss(nc::take_rows(stacked, ia), nc::take_rows(stacked, ip), nc::take_rows(stacked, in), ta.margin);
}

struct AlignmentGradients {
  double loss = 0.0;
  // d(w_align * loss)/d(embedding), one (B, d) row-major buffer per channel.
  std::vector<std::vector<double>> grads;
};

// What the coordinator computes each step from the embeddings it received.
inline AlignmentGradients alignment_gradients(std::span<const Tensor> per_channel, const TripletAssignment& ta,
                                              double w_align) {
  std::vector<Tensor> leaves;
  leaves.reserve(per_channel.size());
  for (const auto& m : per_channel) leaves.push_back(m.detach(true));
  const Tensor loss = alignment_loss(leaves, ta);
  nc::scale(loss, w_align).backward();
  AlignmentGradients out;
  out.loss = loss.item();
  for (const auto& l : leaves) {
    if (l.has_grad()) {
      out.grads.emplace_back(l.grad().begin(), l.grad().end());
    } else {
      out.grads.emplace_back(l.numel(), 0.0);
    }
  }
  return out;
}

}  // namespace modred::obj
