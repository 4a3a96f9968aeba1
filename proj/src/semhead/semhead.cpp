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


#include "semhead/semhead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mixocc {

MaskFormerLayerImpl::MaskFormerLayerImpl(int d, int h, int ffn)
    : cross_attn(register_module("cross_attn", MultiHeadAttention(d, h))),
      norm1_(register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})))),
      norm2_(register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})))),
      norm3_(register_module("norm3", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})))),
      self_attn_(register_module("self_attn", MultiHeadAttention(d, h))),
      ffn_(register_module("ffn", FFN(d, ffn))) {}

Tensor MaskFormerLayerImpl::forward(const Tensor& q, const Tensor& feat) {
  auto y = q;
  if (feat.size(1) > 0) y = y + cross_attn(norm1_(y), feat, feat);
  auto h = norm2_(y);
  y = y + self_attn_(h, h, h);
  return y + ffn_(norm3_(y));
}

MaskFormerImpl::MaskFormerImpl(int num_classes, int d, int h, int ffn, int layers) : num_classes_(num_classes) {
  queries_ = register_parameter("queries", torch::randn({num_classes, d}) * 0.02);
  for (int i = 0; i < layers; ++i) layers_->push_back(MaskFormerLayer(d, h, ffn));
  register_module("layers", layers_);
  norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  mask_embed_ = register_module("mask_embed", MLP(d, d, d, 3));
}

Tensor MaskFormerImpl::forward(const Tensor& bg_features) {
  auto feat = bg_features.unsqueeze(0);
  auto q = queries_.to(bg_features.dtype()).unsqueeze(0);
  for (std::size_t i = 0; i < layers_->size(); ++i) q = layers_[i]->as<MaskFormerLayer>()->forward(q, feat);
  auto emb = mask_embed_(norm_(q)).squeeze(0);  // [Q, C]
  return emb.matmul(bg_features.t());
}

std::vector<Label> classify_bg(const Tensor& logits, const std::vector<Label>& classes) {
  if (logits.dim() != 2 || logits.size(0) != static_cast<std::int64_t>(classes.size()))
    throw std::invalid_argument("classify_bg: logits must be [num_classes, N]");
  auto l = logits.detach().to(torch::kFloat64).contiguous();
  const auto Q = l.size(0), N = l.size(1);
  const double* p = l.data_ptr<double>();
  std::vector<Label> out(N);
  for (std::int64_t n = 0; n < N; ++n) {
    std::int64_t best = 0;
    for (std::int64_t c = 1; c < Q; ++c) {
      if (p[c * N + n] > p[best * N + n]) best = c;
    }
    out[n] = classes[best];
  }
  return out;
}

AssembledScene assemble_scene(const std::vector<FgObject>& fg, const std::vector<Cell>& bg_cells,
                              const std::vector<Label>& bg_classes, GridShape shape, double voxel_size,
                              const Vec3& origin) {
  if (bg_cells.size() != bg_classes.size()) throw std::invalid_argument("assemble_scene: bg size mismatch");
  AssembledScene s;
  s.grid = VoxelGrid(shape, voxel_size, origin);
  s.source.assign(static_cast<std::size_t>(shape.cells()), -1);
  for (std::size_t i = 0; i < bg_cells.size(); ++i) {
    const auto& c = bg_cells[i];
    if (!s.grid.contains(c[0], c[1], c[2])) continue;
    const auto idx = s.grid.index(c[0], c[1], c[2]);
    s.grid.labels[idx] = bg_classes[i];
    s.source[idx] = bg_classes[i] == kFree ? -1 : -2;
  }
  std::vector<int> order(fg.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fg[a].confidence < fg[b].confidence; });
  for (int o : order) {
    const auto& obj = fg[o];
    if (obj.occupied.size() != static_cast<std::size_t>(obj.res) * obj.res * obj.res)
      throw std::invalid_argument("assemble_scene: local grid size mismatch");
    const Vec3 lo = obj.box.min(), hi = obj.box.max();
    Cell c0, c1;
    for (int a = 0; a < 3; ++a) {
      const int n = a == 0 ? shape.d : a == 1 ? shape.w : shape.h;
      c0[a] = std::max(0, static_cast<int>(std::floor((lo[a] - origin[a]) / voxel_size - 0.5)));
      c1[a] = std::min(n - 1, static_cast<int>(std::ceil((hi[a] - origin[a]) / voxel_size - 0.5)));
    }
    for (int x = c0[0]; x <= c1[0]; ++x) {
      for (int y = c0[1]; y <= c1[1]; ++y) {
        for (int z = c0[2]; z <= c1[2]; ++z) {
          const Vec3 p = s.grid.voxel_center(x, y, z);
          int loc[3];
          bool inside = true;
          for (int a = 0; a < 3; ++a) {
            if (p[a] < lo[a] || p[a] > hi[a]) inside = false;
            const double t = (p[a] - lo[a]) / (hi[a] - lo[a]) * obj.res;
            loc[a] = std::clamp(static_cast<int>(std::floor(t)), 0, obj.res - 1);
          }
          if (!inside) continue;
          if (!obj.occupied[(static_cast<std::size_t>(loc[0]) * obj.res + loc[1]) * obj.res + loc[2]]) continue;
          const auto idx = s.grid.index(x, y, z);
          s.grid.labels[idx] = obj.class_id;
          s.source[idx] = o;
        }
      }
    }
  }
  return s;
}

}  // namespace mixocc
