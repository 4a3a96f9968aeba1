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


#include "nn/layers.hpp"

#include <cmath>
#include <numbers>

namespace mixocc {

namespace F = torch::nn::functional;

Tensor sine_embed(const Tensor& x, int num_freqs, double temperature) {
  auto opts = x.options();
  auto i = torch::arange(num_freqs, opts);
  // Frequencies 2*pi / T^(i / F).
  auto freq = 2.0 * std::numbers::pi / torch::pow(torch::full({}, temperature, opts), i / num_freqs);
  auto arg = x.unsqueeze(-1) * freq;  // [..., n, F]
  auto emb = torch::cat({arg.sin(), arg.cos()}, -1);
  auto sizes = x.sizes().vec();
  sizes.back() = sizes.back() * 2 * num_freqs;
  return emb.reshape(sizes);
}

Tensor fourier_embed(const Tensor& x, int num_freqs) {
  auto freq = std::numbers::pi * torch::pow(2.0, torch::arange(num_freqs, x.options()));
  auto arg = x.unsqueeze(-1) * freq;
  auto emb = torch::cat({arg.sin(), arg.cos()}, -1);
  auto sizes = x.sizes().vec();
  sizes.back() = sizes.back() * 2 * num_freqs;
  return emb.reshape(sizes);
}

Tensor inverse_sigmoid(const Tensor& x, double eps) {
  auto c = x.clamp(0, 1);
  return torch::log(c.clamp_min(eps) / (1 - c).clamp_min(eps));
}

MLPImpl::MLPImpl(int in, int hidden, int out, int layers) {
  for (int i = 0; i < layers; ++i) {
    const int a = i == 0 ? in : hidden;
    const int b = i == layers - 1 ? out : hidden;
    layers_->push_back(torch::nn::Linear(a, b));
  }
  register_module("layers", layers_);
}

Tensor MLPImpl::forward(Tensor x) {
  const std::size_t n = layers_->size();
  for (std::size_t i = 0; i < n; ++i) {
    x = layers_[i]->as<torch::nn::Linear>()->forward(x);
    if (i + 1 < n) x = F::gelu(x);
  }
  return x;
}

FFNImpl::FFNImpl(int d_model, int hidden)
    : fc1_(register_module("fc1", torch::nn::Linear(d_model, hidden))),
      fc2_(register_module("fc2", torch::nn::Linear(hidden, d_model))) {}

Tensor FFNImpl::forward(const Tensor& x) { return fc2_(F::gelu(fc1_(x))); }

MultiHeadAttentionImpl::MultiHeadAttentionImpl(int d_model, int n_heads)
    : heads_(n_heads),
      wq_(register_module("wq", torch::nn::Linear(d_model, d_model))),
      wk_(register_module("wk", torch::nn::Linear(d_model, d_model))),
      wv_(register_module("wv", torch::nn::Linear(d_model, d_model))),
      wo_(register_module("wo", torch::nn::Linear(d_model, d_model))) {}

Tensor MultiHeadAttentionImpl::forward(const Tensor& q, const Tensor& k, const Tensor& v,
                                       const Tensor& allowed, Tensor* weights) {
  const auto B = q.size(0), Nq = q.size(1), Nk = k.size(1), C = q.size(2);
  const auto Dh = C / heads_;
  auto split = [&](const Tensor& t, std::int64_t n) {
    return t.view({B, n, heads_, Dh}).transpose(1, 2);  // [B, H, n, Dh]
  };
  auto Q = split(wq_(q), Nq), K = split(wk_(k), Nk), V = split(wv_(v), Nk);
  Tensor out;
  if (weights) {
    auto s = torch::matmul(Q, K.transpose(-2, -1)) / std::sqrt(static_cast<double>(Dh));
    if (allowed.defined()) s = s.masked_fill(allowed.logical_not(), -std::numeric_limits<double>::infinity());
    auto a = torch::softmax(s, -1);
    *weights = a;
    out = torch::matmul(a, V);
  } else {
    std::optional<Tensor> mask;
    if (allowed.defined()) mask = allowed;
    out = at::scaled_dot_product_attention(Q, K, V, mask);
  }
  return wo_(out.transpose(1, 2).reshape({B, Nq, C}));
}

MSDeformAttnImpl::MSDeformAttnImpl(int d_model, int n_levels, int n_heads, int n_points)
    : d_model_(d_model), levels_(n_levels), heads_(n_heads), points_(n_points) {
  offsets_ = register_module("sampling_offsets", torch::nn::Linear(d_model, n_heads * n_levels * n_points * 2));
  attn_ = register_module("attention_weights", torch::nn::Linear(d_model, n_heads * n_levels * n_points));
  value_proj_ = register_module("value_proj", torch::nn::Linear(d_model, d_model));
  out_proj_ = register_module("output_proj", torch::nn::Linear(d_model, d_model));

  torch::NoGradGuard ng;
  offsets_->weight.zero_();
  // Initial offsets fan out radially, one direction per head, growing with the
  // point index.
  auto bias = torch::empty({n_heads, n_levels, n_points, 2});
  for (int h = 0; h < n_heads; ++h) {
    const double th = 2.0 * std::numbers::pi * h / n_heads;
    double cx = std::cos(th), cy = std::sin(th);
    const double m = std::max(std::abs(cx), std::abs(cy));
    cx /= m;
    cy /= m;
    for (int l = 0; l < n_levels; ++l) {
      for (int p = 0; p < n_points; ++p) {
        bias[h][l][p][0] = cx * (p + 1);
        bias[h][l][p][1] = cy * (p + 1);
      }
    }
  }
  offsets_->bias.copy_(bias.view({-1}));
  attn_->weight.zero_();
  attn_->bias.zero_();
  torch::nn::init::xavier_uniform_(value_proj_->weight);
  value_proj_->bias.zero_();
  torch::nn::init::xavier_uniform_(out_proj_->weight);
  out_proj_->bias.zero_();
}

Tensor MSDeformAttnImpl::forward(const Tensor& query, const Tensor& ref, const Tensor& value,
                                 const LevelShapes& shapes, Tensor* weights) {
  TORCH_CHECK(static_cast<int>(shapes.size()) == levels_, "deformable attention: level count mismatch");
  const auto B = query.size(0), Nq = query.size(1);
  const int H = heads_, L = levels_, P = points_;
  const auto Dh = d_model_ / H;

  auto v = value_proj_(value).view({B, -1, H, Dh});
  auto off = offsets_(query).view({B, Nq, H, L, P, 2});
  auto aw = torch::softmax(attn_(query).view({B, Nq, H, L * P}), -1).view({B, Nq, H, L, P});
  if (weights) *weights = aw;

  auto opts = query.options();
  std::vector<double> norm;
  for (const auto& [h, w] : shapes) {
    norm.push_back(w);
    norm.push_back(h);
  }
  auto normalizer = torch::tensor(norm, opts.dtype(torch::kFloat64)).to(opts.dtype()).view({1, 1, 1, L, 1, 2});
  auto loc = ref.view({B, Nq, 1, 1, 1, 2}) + off / normalizer;
  auto grid = 2 * loc - 1;

  Tensor acc;
  std::int64_t start = 0;
  for (int l = 0; l < L; ++l) {
    const auto [h, w] = shapes[l];
    auto vl = v.narrow(1, start, static_cast<std::int64_t>(h) * w)  // [B, hw, H, Dh]
                  .permute({0, 2, 3, 1})
                  .reshape({B * H, Dh, h, w});
    start += static_cast<std::int64_t>(h) * w;
    auto gl = grid.select(3, l).permute({0, 2, 1, 3, 4}).reshape({B * H, Nq, P, 2});
    auto s = F::grid_sample(vl, gl,
                            F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kBorder).align_corners(false));
    // s: [B*H, Dh, Nq, P]
    auto wl = aw.select(3, l).permute({0, 2, 1, 3}).reshape({B * H, 1, Nq, P});
    auto part = (s * wl).sum(-1);
    acc = acc.defined() ? acc + part : part;
  }
  auto out = acc.view({B, H, Dh, Nq}).permute({0, 3, 1, 2}).reshape({B, Nq, d_model_});
  return out_proj_(out);
}

Tensor bilinear_sample(const Tensor& map, const Tensor& xy) {
  auto grid = (2 * xy - 1).view({1, 1, -1, 2});
  auto s = F::grid_sample(map.unsqueeze(0), grid,
                          F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kBorder).align_corners(false));
  return s.view({map.size(0), -1}).t();  // [N, C]
}

}  // namespace mixocc
