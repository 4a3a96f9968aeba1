// Copyright 2026 The mixocc Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <torch/torch.h>

#include <utility>
#include <vector>

namespace mixocc {

using torch::Tensor;

/// (h, w) of each feature scale, finest first.
using LevelShapes = std::vector<std::pair<int, int>>;

/// Sine/cosine features of values in [0, 1]: [..., n] -> [..., n * 2 * num_freqs].
Tensor sine_embed(const Tensor& x, int num_freqs, double temperature = 10000.0);

/// Octave frequencies pi * 2^i, i < num_freqs: [..., n] -> [..., n * 2 * num_freqs].
Tensor fourier_embed(const Tensor& x, int num_freqs);

Tensor inverse_sigmoid(const Tensor& x, double eps = 1e-5);

class MLPImpl : public torch::nn::Module {
 public:
  MLPImpl(int in, int hidden, int out, int layers);
  Tensor forward(Tensor x);

 private:
  torch::nn::ModuleList layers_;
};
TORCH_MODULE(MLP);

class FFNImpl : public torch::nn::Module {
 public:
  FFNImpl(int d_model, int hidden);
  Tensor forward(const Tensor& x);

 private:
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(FFN);

/// Multi-head attention on top of scaled_dot_product_attention.
class MultiHeadAttentionImpl : public torch::nn::Module {
 public:
  MultiHeadAttentionImpl(int d_model, int n_heads);
  /// q [B, Nq, C], k/v [B, Nk, C]; `allowed` is an optional boolean [Nq, Nk]
  /// mask (true = may attend). When `weights` is non-null the attention
  /// matrix [B, H, Nq, Nk] is computed explicitly and returned there.
  Tensor forward(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& allowed = {},
                 Tensor* weights = nullptr);

 private:
  int heads_;
  torch::nn::Linear wq_{nullptr}, wk_{nullptr}, wv_{nullptr}, wo_{nullptr};
};
TORCH_MODULE(MultiHeadAttention);

/// Multi-scale deformable attention: every query samples n_points locations
/// per head and scale around its reference point and mixes them with weights
/// normalized jointly over scales and points.
class MSDeformAttnImpl : public torch::nn::Module {
 public:
  MSDeformAttnImpl(int d_model, int n_levels, int n_heads, int n_points);
  /// query [B, Nq, C]; ref [B, Nq, 2] normalized (x, y); value [B, Nv, C]
  /// flattened over the scales in `shapes`. `weights` receives
  /// [B, Nq, H, L, P] when non-null.
  Tensor forward(const Tensor& query, const Tensor& ref, const Tensor& value, const LevelShapes& shapes,
                 Tensor* weights = nullptr);

  int n_levels() const { return levels_; }

 private:
  int d_model_, levels_, heads_, points_;
  torch::nn::Linear offsets_{nullptr}, attn_{nullptr}, value_proj_{nullptr}, out_proj_{nullptr};
};
TORCH_MODULE(MSDeformAttn);

/// Bilinear sample of a [C, h, w] map at normalized (x, y) with the same
/// conventions as the deformable attention (pixel centers at (i + 0.5) / w,
/// border clamping).
Tensor bilinear_sample(const Tensor& map, const Tensor& xy);

}  // namespace mixocc
