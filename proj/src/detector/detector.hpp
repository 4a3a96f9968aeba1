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
#include "nn/config.hpp"
#include "nn/layers.hpp"
#include "training/hungarian.hpp"

namespace mixocc {

struct FeaturePyramid {
  Tensor memory;  // [B, Nv, C], scales flattened finest first, row-major per scale
  Tensor pos;     // [Nv, C] positional + scale embedding
  LevelShapes shapes;

  std::int64_t locations() const;
  /// Scale s as [B, C, h, w].
  Tensor map(int s) const;
  /// Single image view (batch of one).
  FeaturePyramid image(std::int64_t b) const;
};

/// One ROI per feature location per scale, finest scale first, row-major:
/// centered on the cell with side base * 2^s (normalized), clipped to the
/// unit square.
std::vector<Box2D> preset_rois(const LevelShapes& shapes, double base);
Tensor boxes_to_tensor(const std::vector<Box2D>& boxes, const torch::TensorOptions& opts);

/// Top-k indices of `scores` [N] in descending order; ties go to the lower
/// index. Throws std::invalid_argument unless 1 <= k <= N.
std::vector<std::int64_t> select_top_k(std::span<const double> scores, int k);

/// Hungarian assignment of every GT box to a distinct ROI under
/// l1 * |cxcywh difference|_1 + giou * (1 - GIoU). Returns the ROI index per GT.
Assignment early_match(std::span<const Box2D> rois, std::span<const Box2D> gts, double l1_weight,
                       double giou_weight);

class BackboneImpl : public torch::nn::Module {
 public:
  explicit BackboneImpl(const std::vector<int>& channels);
  /// Outputs of every stage; stage i has stride 2^(i + 2).
  std::vector<Tensor> forward(const Tensor& images);

 private:
  torch::nn::ModuleList stages_;
};
TORCH_MODULE(Backbone);

class EncoderLayerImpl : public torch::nn::Module {
 public:
  EncoderLayerImpl(const DetectorConfig& cfg);
  Tensor forward(const Tensor& x, const Tensor& pos, const Tensor& ref, const LevelShapes& shapes);

 private:
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
  MSDeformAttn attn_{nullptr};
  FFN ffn_{nullptr};
};
TORCH_MODULE(EncoderLayer);

class DecoderLayerImpl : public torch::nn::Module {
 public:
  DecoderLayerImpl(const DetectorConfig& cfg);
  Tensor forward(const Tensor& x, const Tensor& pos, const Tensor& ref_xy, const FeaturePyramid& pyr);

 private:
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr}, norm3_{nullptr};
  MultiHeadAttention self_attn_{nullptr};
  MSDeformAttn cross_attn_{nullptr};
  FFN ffn_{nullptr};
};
TORCH_MODULE(DecoderLayer);

struct DetLayerOutput {
  Tensor logits;   // [B, k, num_classes]
  Tensor boxes2d;  // [B, k, 4] normalized (cx, cy, w, h)
  Tensor boxes3d;  // [B, k, 6] camera frame, meters: center, size
};

struct DetectorOutput {
  FeaturePyramid pyramid;
  Tensor enc_logits;  // [B, Nv, num_classes]
  Tensor enc_boxes;   // [B, Nv, 4]
  Tensor rois;        // [Nv, 4]
  Tensor selected;    // [B, k] location indices
  std::vector<DetLayerOutput> layers;  // one per decoder layer, last is final
  Tensor content;     // [B, k, C] final query features
};

/// Per-image camera intrinsics row: fx, fy, cx, cy.
Tensor intrinsics_tensor(const std::vector<CameraModel>& cams, const torch::TensorOptions& opts);

class DetectorImpl : public torch::nn::Module {
 public:
  DetectorImpl(const DetectorConfig& cfg, int num_classes, int image_width, int image_height);

  FeaturePyramid encode_features(const Tensor& images);
  /// Encoder scores per location [B, Nv] via the shared class head.
  DetectorOutput forward(const Tensor& images, const Tensor& intrinsics,
                         const std::vector<std::vector<std::int64_t>>* forced = nullptr);

  /// Two-stage query selection; `forced` locations (per image) are always
  /// kept, ahead of the rest.
  Tensor select_queries(const Tensor& scores, int k,
                        const std::vector<std::vector<std::int64_t>>* forced = nullptr) const;
  /// Runs the decoder from selected queries.
  void decode_detections(DetectorOutput& out, const Tensor& intrinsics);

  LevelShapes level_shapes() const { return shapes_; }
  const DetectorConfig& config() const { return cfg_; }
  /// Backbone, projections and encoder parameters.
  std::vector<Tensor> encoder_parameters();
  Tensor rois() const { return rois_; }

  /// 3D box from the head output and the 2D box (a constant unless
  /// detach_boxes is off).
  Tensor box3d_from_raw(const Tensor& raw, const Tensor& boxes2d, const Tensor& intrinsics) const;

 private:
  DetectorConfig cfg_;
  int num_classes_, width_, height_;
  LevelShapes shapes_;
  Backbone backbone_{nullptr};
  torch::nn::ModuleList input_proj_;
  Tensor level_embed_;
  torch::nn::ModuleList encoder_;
  torch::nn::ModuleList decoder_;
  torch::nn::Linear enc_output_{nullptr};
  torch::nn::LayerNorm enc_norm_{nullptr}, enc_output_norm_{nullptr}, dec_norm_{nullptr};
  torch::nn::Linear class_head_{nullptr};
  MLP enc_box_head_{nullptr}, box_head_{nullptr}, box3d_head_{nullptr}, query_pos_{nullptr};
  Tensor rois_;  // buffer
  Tensor ref_points_;  // buffer [Nv, 2]
  Tensor pos_;  // buffer [Nv, C] sine part
};
TORCH_MODULE(Detector);

}  // namespace mixocc
