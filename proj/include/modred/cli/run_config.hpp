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
 * @file run_config.hpp
 * @brief The single JSON document that configures every command.
 *
 *     {"train": {...}, "preprocess": {...}, "synth": {...},
 *      "out_dir": "run", "seed": 0}
 *
 * Missing keys take their defaults; unknown keys are fatal.
 */
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "modred/datapipe/preprocess.hpp"
#include "modred/datapipe/synth.hpp"
#include "modred/disttrain/config.hpp"
#include "modred/errors.hpp"
#include "modred/json_util.hpp"

namespace modred::cli {

namespace fs = std::filesystem;

inline constexpr const char* kResolvedConfigName = "resolved_config.json";

struct RunConfig {
  dist::TrainConfig train;
  data::PreprocessConfig preprocess;
  data::SyntheticHeartConfig synth;
  std::string out_dir = "run";
  // Seed for evaluation crops, masks and folds. A --seed flag also sets
  // train.master_seed and synth.rng_seed.
  std::uint64_t seed = 0;

  void validate() const {
    train.validate();
    preprocess.validate();
    synth.validate();
    require(!out_dir.empty(), "out_dir must not be empty");
  }
};

inline void to_json(json& j, const RunConfig& c) {
  j = json{{"train", c.train},
           {"preprocess", c.preprocess},
           {"synth", c.synth},
           {"out_dir", c.out_dir},
           {"seed", c.seed}};
}

inline RunConfig run_config_from_json(const json& j) {
  StrictObject o(j, "config", {"train", "preprocess", "synth", "out_dir", "seed"});
  RunConfig c;
  if (o.has("train")) c.train = dist::train_config_from_json(o.sub("train"), o.child_path("train"));
  if (o.has("preprocess")) {
    c.preprocess = data::preprocess_config_from_json(o.sub("preprocess"), o.child_path("preprocess"));
  }
  if (o.has("synth")) c.synth = data::synth_config_from_json(o.sub("synth"), o.child_path("synth"));
  o.get_to("out_dir", c.out_dir);
  o.get_to("seed", c.seed);
  c.validate();
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

inline void write_resolved_config(const RunConfig& c, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream f(dir / kResolvedConfigName, std::ios::binary);
  if (!f) throw DataError("cannot write " + (dir / kResolvedConfigName).string());
  f << json(c).dump(2) << '\n';
}

}  // namespace modred::cli
