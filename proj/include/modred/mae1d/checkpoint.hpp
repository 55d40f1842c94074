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
 * @file checkpoint.hpp
 * @brief Binary checkpoint of one channel model plus its optimizer state.
 *
 * Layout (all integers little-endian):
 *
 *     "MR1D"                         4 bytes
 *     version                        u32 (= 1)
 *     header length                  u32
 *     header                         UTF-8 JSON: model config, optimizer
 *                                    constants and step, training position
 *     repeated until end of file:
 *       name length                  u16
 *       name                         UTF-8
 *       rank                         u8
 *       dims                         u64 x rank
 *       values                       binary64 x prod(dims), row-major
 *
 * Model parameters come first in named_parameters() order, followed by the
 * AdamW first and second moments as "optim.m.<name>" and "optim.v.<name>".
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modred/bytes.hpp"
#include "modred/errors.hpp"
#include "modred/json_util.hpp"
#include "modred/mae1d/model.hpp"
#include "modred/numcore/optim.hpp"

namespace modred::mae {

inline constexpr char kCheckpointMagic[4] = {'M', 'R', '1', 'D'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Where in a run the checkpoint was taken.
struct TrainingPosition {
  std::uint32_t channel = 0;
  std::int64_t next_epoch = 0;
  std::int64_t total_epochs = 0;
  std::uint64_t global_step = 0;
  std::uint64_t master_seed = 0;

  bool operator==(const TrainingPosition&) const = default;
};

struct LoadedCheckpoint {
  Mae1dModel model;
  nc::AdamWState optimizer;
  TrainingPosition position;
};

namespace detail {

inline void put_entry(ByteWriter& w, const std::string& name, const nc::Shape& shape,
                      std::span<const double> values) {
  if (name.size() > 0xffff) throw CheckpointError("parameter name too long: " + name);
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.bytes(name);
  w.u8(static_cast<std::uint8_t>(shape.size()));
  for (auto d : shape) w.u64(d);
  w.f64s(values);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const Mae1dModel& model, const nc::AdamWState& opt,
                                                   const TrainingPosition& pos) {
  const auto params = model.named_parameters();
  if (opt.first_moment.size() != params.size() || opt.second_moment.size() != params.size()) {
    throw CheckpointError("optimizer state does not match the model's parameter list");
  }
  json header = {
      {"model", model.config()},
      {"optimizer",
       {{"beta1", opt.config.beta1},
        {"beta2", opt.config.beta2},
        {"epsilon", opt.config.epsilon},
        {"weight_decay", opt.config.weight_decay},
        {"step_count", opt.step_count}}},
      {"position",
       {{"channel", pos.channel},
        {"next_epoch", pos.next_epoch},
        {"total_epochs", pos.total_epochs},
        {"global_step", pos.global_step},
        {"master_seed", pos.master_seed}}},
  };
  const std::string text = header.dump();
  ByteWriter w;
  w.bytes(std::string_view(kCheckpointMagic, 4));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
  for (const auto& p : params) detail::put_entry(w, p.name, p.tensor.shape(), p.tensor.data());
  for (std::size_t i = 0; i < params.size(); ++i) {
    detail::put_entry(w, "optim.m." + params[i].name, params[i].tensor.shape(), opt.first_moment[i]);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    detail::put_entry(w, "optim.v." + params[i].name, params[i].tensor.shape(), opt.second_moment[i]);
  }
  return w.take();
}

inline LoadedCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader<CheckpointError> r(bytes);
  if (r.str(4) != std::string_view(kCheckpointMagic, 4)) throw CheckpointError("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const std::uint32_t header_len = r.u32();
  json header;
  try {
    header = json::parse(r.str(header_len));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: malformed header: ") + e.what());
  }

  ModelConfig cfg;
  nc::AdamWConfig adam;
  std::uint64_t step_count = 0;
  TrainingPosition pos;
  try {
    cfg = model_config_from_json(header.at("model"));
    const auto& o = header.at("optimizer");
    adam = {o.at("beta1").get<double>(), o.at("beta2").get<double>(), o.at("epsilon").get<double>(),
            o.at("weight_decay").get<double>()};
    step_count = o.at("step_count").get<std::uint64_t>();
    const auto& p = header.at("position");
    pos.channel = p.at("channel").get<std::uint32_t>();
    pos.next_epoch = p.at("next_epoch").get<std::int64_t>();
    pos.total_epochs = p.at("total_epochs").get<std::int64_t>();
    pos.global_step = p.at("global_step").get<std::uint64_t>();
    pos.master_seed = p.at("master_seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: incomplete header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint: invalid model config: ") + e.what());
  }

  struct Entry {
    nc::Shape shape;
    std::vector<double> values;
  };
  std::map<std::string, Entry> entries;
  std::size_t model_values = 0;
  while (!r.done()) {
    const std::string name = r.str(r.u16());
    const std::uint8_t rank = r.u8();
    nc::Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    const std::size_t n = nc::shape_numel(shape);
    Entry e{shape, r.f64s(n)};
    if (name.rfind("optim.", 0) != 0) model_values += n;
    if (!entries.emplace(name, std::move(e)).second) throw CheckpointError("checkpoint: duplicate entry " + name);
  }
  if (model_values != count_params(cfg)) {
    throw CheckpointError("checkpoint: parameter count mismatch: file holds " + std::to_string(model_values) +
                          ", configuration implies " + std::to_string(count_params(cfg)));
  }

  LoadedCheckpoint out{Mae1dModel(cfg, 0), nc::AdamWState{}, pos};
  const auto params = out.model.named_parameters();
  out.optimizer.config = adam;
  out.optimizer.step_count = step_count;
  auto take = [&](const std::string& name, const nc::Shape& shape) -> std::vector<double> {
    auto it = entries.find(name);
    if (it == entries.end()) throw CheckpointError("checkpoint: missing entry " + name);
    if (it->second.shape != shape) throw CheckpointError("checkpoint: shape mismatch for " + name);
    auto v = std::move(it->second.values);
    entries.erase(it);
    return v;
  };
  for (const auto& p : params) {
    auto v = take(p.name, p.tensor.shape());
    auto t = p.tensor;
    std::copy(v.begin(), v.end(), t.mutable_data().begin());
    out.optimizer.first_moment.push_back(take("optim.m." + p.name, p.tensor.shape()));
    out.optimizer.second_moment.push_back(take("optim.v." + p.name, p.tensor.shape()));
  }
  if (!entries.empty()) throw CheckpointError("checkpoint: unexpected entry " + entries.begin()->first);
  return out;
}

inline void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("write failed: " + path.string());
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingFileError("cannot open: " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

inline void save_checkpoint(const std::filesystem::path& path, const Mae1dModel& model, const nc::AdamWState& opt,
                            const TrainingPosition& pos) {
  write_bytes(path, encode_checkpoint(model, opt, pos));
}

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_bytes(path));
}

}  // namespace modred::mae
