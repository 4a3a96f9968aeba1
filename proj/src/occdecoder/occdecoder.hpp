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

#include <optional>
#include <vector>

#include "detector/detector.hpp"
#include "geometry/geometry.hpp"
#include "nn/config.hpp"
#include "nn/layers.hpp"

namespace mixocc {

/// Queries of one image at one decoder level. Background rows come first,
/// then each object's 8^level rows contiguously.
struct OccQuerySet {
  Tensor content;  // [N, C]
  Tensor boxes;    // [N, 6] grid frame (lo xyz, hi xyz), float64, no grad
  Tensor cells;    // [N, 3] int64; bg: cell at this level, fg: cell inside its object
  int n_bg = 0;
  int n_objects = 0;
  int level = 0;

  std::int64_t size() const { return content.size(0); }
  int fg_per_object() const { return 1 << (3 * level); }
};

struct FgSeed {
  Tensor content;  // [C]
  Box3D box;       // grid frame, already enlarged and clipped
};

/// Detection box (camera frame) -> grid frame, enlarged, clipped to the
/// grid. Empty when the clipped box is degenerate.
std::optional<Box3D> fg_query_box(const Box3D& camera_box, const CameraModel& cam, GridShape shape,
                                  double voxel_size, const Vec3& origin, double enlarge);

struct OccLevelRecord {
  Tensor bg_logits;     // [n_bg] after the level's layer
  Tensor bg_cells;      // [n_bg, 3]
  Tensor child_logits;  // [8 n_bg] ranking scores of the children (not at the last level)
  Tensor child_cells;   // [8 n_bg, 3] at level + 1
  Tensor kept;          // [K] indices into the children that were retained
};

struct QueryCounts {
  std::int64_t bg_processed = 0;   // background queries entering a decoder layer
  std::int64_t fg_processed = 0;
  std::int64_t children_scored = 0;
  std::vector<std::int64_t> bg_per_level;
};

struct OccOutput {
  std::vector<OccLevelRecord> levels;
  Tensor fg_logits;    // [n_obj, res^3], index (i * res + j) * res + k, i along x
  std::vector<Box3D> fg_boxes;
  Tensor bg_features;  // [n, C] final-level background contents
  Tensor bg_cells;     // [n, 3] voxel coordinates
  Tensor bg_logits;    // [n]
  QueryCounts counts;
};

class OccLayerImpl : public torch::nn::Module {
 public:
  OccLayerImpl(int d_model, int n_heads, int n_points, int n_levels, int ffn_dim);
  /// `valid` [N] is 1 for queries whose reference projects into the image.
  Tensor forward(const Tensor& x, const Tensor& pos, const Tensor& ref, const Tensor& valid,
                 const FeaturePyramid& pyr, const Tensor& allowed);

  MultiHeadAttention self_attn{nullptr};
  MSDeformAttn cross_attn{nullptr};

 private:
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr}, norm3_{nullptr};
  FFN ffn_{nullptr};
};
TORCH_MODULE(OccLayer);

class OccDecoderImpl : public torch::nn::Module {
 public:
  OccDecoderImpl(const Config& cfg);

  /// Sinusoidal features of the normalized center and extent, then a
  /// two-layer map to d_model. boxes [N, 6] lo/hi in the grid frame.
  Tensor encode_box3d(const Tensor& boxes);
  OccQuerySet init_queries(const std::vector<FgSeed>& fg, const torch::TensorOptions& opts);
  /// Attention layer of `level`; single-image pyramid ([1, Nv, C] memory).
  void layer(int level, OccQuerySet& q, const FeaturePyramid& pyr, const CameraModel& cam);
  Tensor occupancy_logits(int level, const Tensor& content);
  /// Splits every query into its 8 children, keeps all foreground children
  /// and the top `k_next` background children by occupancy score.
  OccQuerySet upsample_step(const OccQuerySet& q, int k_next, OccLevelRecord* record = nullptr);
  OccOutput forward(const std::vector<FgSeed>& fg, const FeaturePyramid& pyr, const CameraModel& cam);

  int levels() const { return cfg_.occdecoder.levels; }
  int k_at(int l) const { return ks_.at(l - 1); }
  void set_k(std::vector<int> ks) { ks_ = std::move(ks); }
  GridShape level_shape(int level) const;
  /// Reference points [N, 2] and validity [N] for box centers.
  std::pair<Tensor, Tensor> reference_points(const Tensor& boxes, const CameraModel& cam) const;

 private:
  Config cfg_;
  std::vector<int> ks_;
  Vec3 lo_, extent_;
  MLP box_encoder_{nullptr};
  torch::nn::LayerNorm box_norm_{nullptr};
  Tensor bg_embed_;
  torch::nn::ModuleList layers_;
  torch::nn::ModuleList heads_;
  torch::nn::ModuleList head_norms_;
};
TORCH_MODULE(OccDecoder);

/// Upper bound on background recall at one level: the fraction of occupied
/// cells (flat 0/1 `occupancy`, index (x * w + y) * h + z) that are among the
/// retained `cells` [K, 3]. 1 when nothing is occupied.
double retained_recall(const Tensor& cells, const Tensor& occupancy, GridShape shape);

}  // namespace mixocc
