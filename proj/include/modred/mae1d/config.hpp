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

#include <cstddef>
#include <cstdint>
#include <string>

#include "modred/json_util.hpp"

namespace modred::mae {

inline constexpr double kLayerNormEps = 1e-5;

// Defaults are the full-size model: 5 s at 500 Hz in 0.2 s patches, a
// 12-block 768-wide encoder and an 8-block 512-wide decoder.
struct ModelConfig {
  std::size_t signal_len = 2500;
  std::size_t patch_len = 100;
  std::size_t enc_dim = 768;
  std::size_t enc_depth = 12;
  std::size_t enc_heads = 8;
  std::size_t dec_dim = 512;
  std::size_t dec_depth = 8;
  std::size_t dec_heads = 16;
  double mlp_ratio = 4.0;
  bool qkv_bias = true;
  double mask_ratio = 0.75;
  // Reconstruction loss over masked patches only instead of the full window.
  bool loss_masked_only = false;

  std::size_t num_patches() const { return signal_len / patch_len; }
  std::size_t enc_hidden() const { return static_cast<std::size_t>(static_cast<double>(enc_dim) * mlp_ratio); }
  std::size_t dec_hidden() const { return static_cast<std::size_t>(static_cast<double>(dec_dim) * mlp_ratio); }

  // The desk-scale configuration used throughout the tests.
  static ModelConfig tiny() {
    ModelConfig c;
    c.signal_len = 100;
    c.patch_len = 10;
    c.enc_dim = 32;
    c.enc_depth = 2;
    c.enc_heads = 4;
    c.dec_dim = 16;
    c.dec_depth = 1;
    c.dec_heads = 4;
    c.mlp_ratio = 2.0;
    c.mask_ratio = 0.75;
    return c;
  }

  void validate() const {
    require(patch_len > 0 && signal_len > 0, "model: signal_len and patch_len must be positive");
    require(signal_len % patch_len == 0, "model: signal_len must be a multiple of patch_len");
    require(enc_dim > 0 && enc_heads > 0 && enc_dim % enc_heads == 0, "model: enc_dim must be divisible by enc_heads");
    require(dec_dim > 0 && dec_heads > 0 && dec_dim % dec_heads == 0, "model: dec_dim must be divisible by dec_heads");
    require(enc_dim % 2 == 0 && dec_dim % 2 == 0, "model: embedding dims must be even for sine-cosine positions");
    require(mlp_ratio > 0.0 && enc_hidden() > 0 && dec_hidden() > 0, "model: mlp_ratio must be positive");
    require(mask_ratio >= 0.0 && mask_ratio < 1.0, "model: mask_ratio must lie in [0, 1)");
  }

  bool operator==(const ModelConfig&) const = default;
};

inline void to_json(json& j, const ModelConfig& c) {
  j = json{{"signal_len", c.signal_len}, {"patch_len", c.patch_len},   {"enc_dim", c.enc_dim},
           {"enc_depth", c.enc_depth},   {"enc_heads", c.enc_heads},   {"dec_dim", c.dec_dim},
           {"dec_depth", c.dec_depth},   {"dec_heads", c.dec_heads},   {"mlp_ratio", c.mlp_ratio},
           {"qkv_bias", c.qkv_bias},     {"mask_ratio", c.mask_ratio}, {"loss_masked_only", c.loss_masked_only}};
}

inline ModelConfig model_config_from_json(const json& j, const std::string& path = "model") {
  StrictObject o(j, path,
                 {"signal_len", "patch_len", "enc_dim", "enc_depth", "enc_heads", "dec_dim", "dec_depth",
                  "dec_heads", "mlp_ratio", "qkv_bias", "mask_ratio", "loss_masked_only"});
  ModelConfig c;
  o.get_to("signal_len", c.signal_len);
  o.get_to("patch_len", c.patch_len);
  o.get_to("enc_dim", c.enc_dim);
  o.get_to("enc_depth", c.enc_depth);
  o.get_to("enc_heads", c.enc_heads);
  o.get_to("dec_dim", c.dec_dim);
  o.get_to("dec_depth", c.dec_depth);
  o.get_to("dec_heads", c.dec_heads);
  o.get_to("mlp_ratio", c.mlp_ratio);
  o.get_to("qkv_bias", c.qkv_bias);
  o.get_to("mask_ratio", c.mask_ratio);
  o.get_to("loss_masked_only", c.loss_masked_only);
  c.validate();
  return c;
}

}  // namespace modred::mae
