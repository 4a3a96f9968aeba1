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

#include <vector>

#include "geometry/geometry.hpp"
#include "nn/layers.hpp"

namespace mixocc {

class MaskFormerLayerImpl : public torch::nn::Module {
 public:
  MaskFormerLayerImpl(int d_model, int n_heads, int ffn_dim);
  /// q [1, Q, C], feat [1, N, C]
  Tensor forward(const Tensor& q, const Tensor& feat);

  MultiHeadAttention cross_attn{nullptr};

 private:
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr}, norm3_{nullptr};
  MultiHeadAttention self_attn_{nullptr};
  FFN ffn_{nullptr};
};
TORCH_MODULE(MaskFormerLayer);

/// One learned query per background class. Logits [num_classes, N] are dot
/// products of the refined query embeddings with the background features.
class MaskFormerImpl : public torch::nn::Module {
 public:
  MaskFormerImpl(int num_classes, int d_model, int n_heads, int ffn_dim, int layers);
  Tensor forward(const Tensor& bg_features);
  int num_classes() const { return num_classes_; }

 private:
  int num_classes_;
  Tensor queries_;
  torch::nn::ModuleList layers_;
  torch::nn::LayerNorm norm_{nullptr};
  MLP mask_embed_{nullptr};
};
TORCH_MODULE(MaskFormer);

/// Per-cell argmax over the rows of `logits` [num_classes, N]; ties go to the
/// lower row. Returns `classes[row]` per cell.
std::vector<Label> classify_bg(const Tensor& logits, const std::vector<Label>& classes);

struct FgObject {
  Box3D box;                   // grid frame, enlarged and clipped
  Label class_id = 0;
  double confidence = 0;
  int res = 0;
  std::vector<std::uint8_t> occupied;  // res^3, index (i * res + j) * res + k
};

struct AssembledScene {
  VoxelGrid grid;
  // -1 free, -2 background classifier, otherwise the fg object index
  std::vector<int> source;
};

/// Background labels first, then foreground objects in increasing confidence
/// so the most confident object owns any overlap. A voxel belongs to an
/// object when its center lies in the box; its local cell is the nearest one.
AssembledScene assemble_scene(const std::vector<FgObject>& fg, const std::vector<Cell>& bg_cells,
                              const std::vector<Label>& bg_classes, GridShape shape, double voxel_size,
                              const Vec3& origin);

}  // namespace mixocc
