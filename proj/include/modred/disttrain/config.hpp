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
#include <string>

#include "modred/json_util.hpp"
#include "modred/mae1d/config.hpp"
#include "modred/numcore/optim.hpp"
#include "modred/objectives/losses.hpp"
#include "modred/rng.hpp"

namespace modred::dist {

struct TrainConfig {
  std::size_t channels = 12;
  mae::ModelConfig model;
  std::size_t batch_size = 256;
  std::int64_t epochs = 200;
  double base_lr = 1e-3;
  std::int64_t warmup_epochs = 0;
  nc::AdamWConfig adamw;
  bool curriculum = true;
  bool align = true;
  double margin = obj::kDefaultMargin;
  // Every channel model starts from the same initial weights.
  bool shared_init = true;
  std::uint64_t master_seed = 0;
  std::string manifest;
  std::string checkpoint_dir;

  void validate() const {
    model.validate();
    require(channels >= 1 && channels <= 255, "train.channels must lie in [1, 255]");
    require(batch_size >= 2, "train.batch_size must be >= 2");
    require(epochs >= 1, "train.epochs must be >= 1");
    require(base_lr >= 0.0, "train.base_lr must be >= 0");
    require(warmup_epochs >= 0 && warmup_epochs <= epochs, "train.warmup_epochs must lie in [0, epochs]");
    require(margin >= 0.0, "train.margin must be >= 0");
    require(!align || channels >= 2, "train.align needs at least two channels");
    require(adamw.beta1 >= 0.0 && adamw.beta1 < 1.0 && adamw.beta2 >= 0.0 && adamw.beta2 < 1.0,
            "train.adamw betas must lie in [0, 1)");
    require(adamw.epsilon > 0.0 && adamw.weight_decay >= 0.0, "train.adamw epsilon must be > 0, weight_decay >= 0");
  }

  nc::LrSchedule lr_schedule() const {
    return {base_lr, static_cast<int>(epochs), static_cast<int>(warmup_epochs)};
  }

  // w_align = 0 with alignment off; constant (1, 1) with the curriculum off.
  obj::CurriculumWeights weights(std::int64_t epoch) const {
    if (!align) return {0.0, 1.0};
    if (!curriculum) return {1.0, 1.0};
    return obj::curriculum_weights({epoch, epochs});
  }

  std::uint64_t epoch_seed(std::int64_t epoch) const {
    return derive_seed(master_seed, {seed_tag::kEpoch, static_cast<std::uint64_t>(epoch)});
  }

  std::uint64_t init_seed(std::size_t channel) const {
    return shared_init ? derive_seed(master_seed, {seed_tag::kInit})
                       : derive_seed(master_seed, {seed_tag::kInit, channel});
  }
};

inline void to_json(json& j, const TrainConfig& c) {
  j = {{"channels", c.channels},
       {"model", c.model},
       {"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"base_lr", c.base_lr},
       {"warmup_epochs", c.warmup_epochs},
       {"adamw",
        {{"beta1", c.adamw.beta1},
         {"beta2", c.adamw.beta2},
         {"epsilon", c.adamw.epsilon},
         {"weight_decay", c.adamw.weight_decay}}},
       {"curriculum", c.curriculum},
       {"align", c.align},
       {"margin", c.margin},
       {"shared_init", c.shared_init},
       {"master_seed", c.master_seed},
       {"manifest", c.manifest},
       {"checkpoint_dir", c.checkpoint_dir}};
}

inline TrainConfig train_config_from_json(const json& j, const std::string& path = "train") {
  StrictObject o(j, path,
                 {"channels", "model", "batch_size", "epochs", "base_lr", "warmup_epochs", "adamw", "curriculum",
                  "align", "margin", "shared_init", "master_seed", "manifest", "checkpoint_dir"});
  TrainConfig c;
  o.get_to("channels", c.channels);
  if (o.has("model")) c.model = mae::model_config_from_json(o.sub("model"), o.child_path("model"));
  o.get_to("batch_size", c.batch_size);
  o.get_to("epochs", c.epochs);
  o.get_to("base_lr", c.base_lr);
  o.get_to("warmup_epochs", c.warmup_epochs);
  if (o.has("adamw")) {
    StrictObject a(o.sub("adamw"), o.child_path("adamw"), {"beta1", "beta2", "epsilon", "weight_decay"});
    a.get_to("beta1", c.adamw.beta1);
    a.get_to("beta2", c.adamw.beta2);
    a.get_to("epsilon", c.adamw.epsilon);
    a.get_to("weight_decay", c.adamw.weight_decay);
  }
  o.get_to("curriculum", c.curriculum);
  o.get_to("align", c.align);
  o.get_to("margin", c.margin);
  o.get_to("shared_init", c.shared_init);
  o.get_to("master_seed", c.master_seed);
  o.get_to("manifest", c.manifest);
  o.get_to("checkpoint_dir", c.checkpoint_dir);
  c.validate();
  return c;
}

}  // namespace modred::dist
