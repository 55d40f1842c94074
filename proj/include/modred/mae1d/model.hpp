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
 * @file model.hpp
 * @brief One-dimensional masked autoencoder.
 *
 * The signal is cut into non-overlapping patches, each projected linearly to
 * the encoder width (a stride == window 1-D convolution), offset by a fixed
 * sine-cosine table, randomly thinned, and prefixed with a learned CLS token.
 * A pre-norm transformer encoder processes the visible tokens; a narrower
 * decoder re-inserts a learned mask token at every hidden slot, restores the
 * temporal order and predicts the raw samples of every patch.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "modred/errors.hpp"
#include "modred/mae1d/config.hpp"
#include "modred/mae1d/mask.hpp"
#include "modred/numcore/ops.hpp"
#include "modred/rng.hpp"

namespace modred::mae {

using nc::Tensor;

// (signal_len) -> (L, patch_len); patch k holds samples [k*P, (k+1)*P).
inline Tensor patchify(const Tensor& signal, std::size_t patch_len) {
  if (signal.rank() != 1) throw ShapeError("patchify: expected a 1-D signal");
  if (patch_len == 0 || signal.numel() % patch_len != 0) {
    throw ShapeError("patchify: length " + std::to_string(signal.numel()) + " is not a multiple of " +
                     std::to_string(patch_len));
  }
  return nc::reshape(signal, {signal.numel() / patch_len, patch_len});
}

inline Tensor unpatchify(const Tensor& patches) {
  if (patches.rank() != 2) throw ShapeError("unpatchify: expected (L, patch_len)");
  return nc::reshape(patches, {patches.numel()});
}

// Row p, pair j: sin(p / 10000^(2j/dim)) at column 2j, cos(...) at 2j+1.
inline Tensor sincos_positions(std::size_t length, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) throw ConfigError("sincos_positions: dim must be even and positive");
  std::vector<double> v(length * dim);
  for (std::size_t p = 0; p < length; ++p) {
    for (std::size_t j = 0; j < dim / 2; ++j) {
      const double freq = std::pow(10000.0, 2.0 * static_cast<double>(j) / static_cast<double>(dim));
      const double angle = static_cast<double>(p) / freq;
      v[p * dim + 2 * j] = std::sin(angle);
      v[p * dim + 2 * j + 1] = std::cos(angle);
    }
  }
  return Tensor::from({length, dim}, std::move(v));
}

struct VitBlock {
  Tensor norm1_weight, norm1_bias;
  nc::AttentionWeights attn;
  Tensor norm2_weight, norm2_bias;
  Tensor fc1_weight, fc1_bias, fc2_weight, fc2_bias;
};

inline std::size_t vit_block_params(std::size_t dim, std::size_t hidden, bool qkv_bias) {
  return 2 * dim                                  // norm1
         + 3 * dim * dim + (qkv_bias ? 3 * dim : 0)  // qkv
         + dim * dim + dim                        // proj
         + 2 * dim                                // norm2
         + dim * hidden + hidden                  // fc1
         + hidden * dim + dim;                    // fc2
}

// Closed-form parameter count.
inline std::size_t count_params(const ModelConfig& c) {
  const std::size_t e = c.enc_dim, d = c.dec_dim, p = c.patch_len;
  return p * e + e                                       // patch projection
         + e                                             // cls token
         + c.enc_depth * vit_block_params(e, c.enc_hidden(), c.qkv_bias)
         + 2 * e                                         // encoder norm
         + e * d + d                                     // encoder -> decoder
         + d                                             // mask token
         + c.dec_depth * vit_block_params(d, c.dec_hidden(), c.qkv_bias)
         + 2 * d                                         // decoder norm
         + d * p + p;                                    // prediction head
}

struct EncoderOutput {
  Tensor tokens;  // (1 + n_visible, enc_dim); row 0 is the CLS token
  MaskPlan mask_plan;

  Tensor cls() const { return nc::slice_rows(tokens, 0, 1); }
};

struct NamedParam {
  std::string name;
  Tensor tensor;
};

class Mae1dModel {
 public:
  Mae1dModel(ModelConfig config, std::uint64_t init_seed) : cfg_(std::move(config)) {
    cfg_.validate();
    Rng rng(init_seed);
    const std::size_t e = cfg_.enc_dim, d = cfg_.dec_dim, p = cfg_.patch_len;
    patch_w_ = uniform_param({p, e}, p, rng);
    patch_b_ = uniform_param({e}, p, rng);
    cls_token_ = normal_param({1, e}, rng);
    for (std::size_t i = 0; i < cfg_.enc_depth; ++i) blocks_.push_back(make_block(e, cfg_.enc_hidden(), rng));
    norm_w_ = Tensor::full({e}, 1.0, true);
    norm_b_ = Tensor::zeros({e}, true);
    dec_embed_w_ = uniform_param({e, d}, e, rng);
    dec_embed_b_ = uniform_param({d}, e, rng);
    mask_token_ = normal_param({1, d}, rng);
    for (std::size_t i = 0; i < cfg_.dec_depth; ++i) dec_blocks_.push_back(make_block(d, cfg_.dec_hidden(), rng));
    dec_norm_w_ = Tensor::full({d}, 1.0, true);
    dec_norm_b_ = Tensor::zeros({d}, true);
    pred_w_ = uniform_param({d, p}, d, rng);
    pred_b_ = uniform_param({p}, d, rng);
    enc_pos_ = sincos_positions(cfg_.num_patches(), e);
    dec_pos_ = sincos_positions(cfg_.num_patches(), d);
  }

  const ModelConfig& config() const { return cfg_; }

  // Stable order; checkpoints and optimizer state follow it.
  std::vector<NamedParam> named_parameters() const {
    std::vector<NamedParam> out;
    out.push_back({"patch_embed.weight", patch_w_});
    out.push_back({"patch_embed.bias", patch_b_});
    out.push_back({"cls_token", cls_token_});
    append_blocks(out, "blocks", blocks_);
    out.push_back({"norm.weight", norm_w_});
    out.push_back({"norm.bias", norm_b_});
    out.push_back({"decoder_embed.weight", dec_embed_w_});
    out.push_back({"decoder_embed.bias", dec_embed_b_});
    out.push_back({"mask_token", mask_token_});
    append_blocks(out, "decoder_blocks", dec_blocks_);
    out.push_back({"decoder_norm.weight", dec_norm_w_});
    out.push_back({"decoder_norm.bias", dec_norm_b_});
    out.push_back({"decoder_pred.weight", pred_w_});
    out.push_back({"decoder_pred.bias", pred_b_});
    return out;
  }

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out;
    for (auto& np : named_parameters()) out.push_back(np.tensor);
    return out;
  }

  void zero_grad() const {
    for (auto t : parameters()) t.zero_grad();
  }

  const Tensor& encoder_positions() const { return enc_pos_; }
  const Tensor& decoder_positions() const { return dec_pos_; }

  // plan == nullptr keeps every patch.
  EncoderOutput encode(const Tensor& signal, const MaskPlan* plan = nullptr) const {
    if (signal.rank() != 1 || signal.numel() != cfg_.signal_len) {
      throw ShapeError("encode: expected a signal of " + std::to_string(cfg_.signal_len) + " samples, got " +
                       nc::shape_str(signal.shape()));
    }
    const std::size_t L = cfg_.num_patches();
    MaskPlan used = plan ? *plan : MaskPlan::none(L);
    if (used.num_patches() != L) throw ConfigError("encode: mask plan is for a different patch count");

    Tensor x = nc::linear(patchify(signal, cfg_.patch_len), patch_w_, patch_b_);
    x = nc::add(x, enc_pos_);
    Tensor tokens = cls_token_;
    if (!used.visible_idx.empty()) tokens = nc::concat_rows({cls_token_, nc::take_rows(x, used.visible_idx)});
    for (const auto& b : blocks_) tokens = block_forward(b, tokens, cfg_.enc_heads);
    tokens = nc::layer_norm(tokens, norm_w_, norm_b_, kLayerNormEps);
    return EncoderOutput{tokens, std::move(used)};
  }

  // Per-patch prediction (L, patch_len) from an encoder output, which may
  // come from a different model of compatible shape (cross-decoding).
  Tensor decode(const EncoderOutput& enc) const {
    const std::size_t L = cfg_.num_patches();
    const auto& plan = enc.mask_plan;
    if (enc.tokens.rank() != 2 || enc.tokens.dim(1) != cfg_.enc_dim || plan.num_patches() != L ||
        enc.tokens.dim(0) != 1 + plan.visible_idx.size()) {
      throw ConfigError("decode: encoder output is incompatible with this model's configuration");
    }
    const std::size_t nv = plan.visible_idx.size();
    const std::size_t nm = plan.masked_idx.size();
    Tensor y = nc::linear(enc.tokens, dec_embed_w_, dec_embed_b_);
    Tensor cls = nc::slice_rows(y, 0, 1);
    std::vector<Tensor> seq;
    if (nv > 0) seq.push_back(nc::slice_rows(y, 1, 1 + nv));
    if (nm > 0) {
      const std::vector<std::size_t> zeros(nm, 0);
      seq.push_back(nc::take_rows(mask_token_, zeros));
    }
    Tensor shuffled = seq.size() == 1 ? seq[0] : nc::concat_rows(seq);
    Tensor temporal = nc::add(nc::take_rows(shuffled, plan.restore_perm), dec_pos_);
    Tensor h = nc::concat_rows({cls, temporal});
    for (const auto& b : dec_blocks_) h = block_forward(b, h, cfg_.dec_heads);
    h = nc::layer_norm(h, dec_norm_w_, dec_norm_b_, kLayerNormEps);
    Tensor pred = nc::linear(h, pred_w_, pred_b_);
    return nc::slice_rows(pred, 1, 1 + L);
  }

  // encode -> decode -> flatten back to (signal_len).
  Tensor reconstruct(const Tensor& signal, const MaskPlan* plan = nullptr) const {
    return unpatchify(decode(encode(signal, plan)));
  }

  // Copies parameter values from another model of the same configuration.
  void copy_parameters_from(const Mae1dModel& other) {
    if (!(other.cfg_ == cfg_)) throw ConfigError("copy_parameters_from: configuration mismatch");
    auto dst = parameters();
    auto src = other.parameters();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      auto d = dst[i].mutable_data();
      std::copy(src[i].data().begin(), src[i].data().end(), d.begin());
    }
  }

 private:
  static Tensor uniform_param(nc::Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(nc::shape_numel(shape));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor::from(std::move(shape), std::move(v), true);
  }

  static Tensor normal_param(nc::Shape shape, Rng& rng) {
    std::vector<double> v(nc::shape_numel(shape));
    for (auto& x : v) x = rng.normal(0.0, 0.02);
    return Tensor::from(std::move(shape), std::move(v), true);
  }

  VitBlock make_block(std::size_t dim, std::size_t hidden, Rng& rng) const {
    VitBlock b;
    b.norm1_weight = Tensor::full({dim}, 1.0, true);
    b.norm1_bias = Tensor::zeros({dim}, true);
    b.attn.qkv_weight = uniform_param({dim, 3 * dim}, dim, rng);
    if (cfg_.qkv_bias) b.attn.qkv_bias = uniform_param({3 * dim}, dim, rng);
    b.attn.proj_weight = uniform_param({dim, dim}, dim, rng);
    b.attn.proj_bias = uniform_param({dim}, dim, rng);
    b.norm2_weight = Tensor::full({dim}, 1.0, true);
    b.norm2_bias = Tensor::zeros({dim}, true);
    b.fc1_weight = uniform_param({dim, hidden}, dim, rng);
    b.fc1_bias = uniform_param({hidden}, dim, rng);
    b.fc2_weight = uniform_param({hidden, dim}, hidden, rng);
    b.fc2_bias = uniform_param({dim}, hidden, rng);
    return b;
  }

  void append_blocks(std::vector<NamedParam>& out, const std::string& prefix,
                     const std::vector<VitBlock>& blocks) const {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string p = prefix + "." + std::to_string(i) + ".";
      const auto& b = blocks[i];
      out.push_back({p + "norm1.weight", b.norm1_weight});
      out.push_back({p + "norm1.bias", b.norm1_bias});
      out.push_back({p + "attn.qkv.weight", b.attn.qkv_weight});
      if (cfg_.qkv_bias) out.push_back({p + "attn.qkv.bias", b.attn.qkv_bias});
      out.push_back({p + "attn.proj.weight", b.attn.proj_weight});
      out.push_back({p + "attn.proj.bias", b.attn.proj_bias});
      out.push_back({p + "norm2.weight", b.norm2_weight});
      out.push_back({p + "norm2.bias", b.norm2_bias});
      out.push_back({p + "mlp.fc1.weight", b.fc1_weight});
      out.push_back({p + "mlp.fc1.bias", b.fc1_bias});
      out.push_back({p + "mlp.fc2.weight", b.fc2_weight});
      out.push_back({p + "mlp.fc2.bias", b.fc2_bias});
    }
  }

  Tensor block_forward(const VitBlock& b, const Tensor& x, std::size_t heads) const {
    Tensor h = nc::layer_norm(x, b.norm1_weight, b.norm1_bias, kLayerNormEps);
    Tensor y = nc::add(x, nc::multi_head_attention(h, b.attn, heads, cfg_.qkv_bias));
    Tensor h2 = nc::layer_norm(y, b.norm2_weight, b.norm2_bias, kLayerNormEps);
    Tensor mlp = nc::linear(nc::gelu(nc::linear(h2, b.fc1_weight, b.fc1_bias)), b.fc2_weight, b.fc2_bias);
    return nc::add(y, mlp);
  }

  ModelConfig cfg_;
  Tensor patch_w_, patch_b_, cls_token_;
  std::vector<VitBlock> blocks_;
  Tensor norm_w_, norm_b_;
  Tensor dec_embed_w_, dec_embed_b_, mask_token_;
  std::vector<VitBlock> dec_blocks_;
  Tensor dec_norm_w_, dec_norm_b_;
  Tensor pred_w_, pred_b_;
  Tensor enc_pos_, dec_pos_;
};

// Channel j's decoder applied to channel i's encoder output. decode()
// rejects outputs whose width or patch count differ from the decoder's.
inline Tensor cross_decode(const Mae1dModel& decoder_model, const EncoderOutput& enc_from_other) {
  return decoder_model.decode(enc_from_other);
}

}  // namespace modred::mae
