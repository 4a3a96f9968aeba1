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

#include <span>
#include <vector>

#include "geometry/geometry.hpp"

namespace mixocc {

struct MiouResult {
  std::vector<double> iou;  // per class id 1..num_classes-1 at index id; NaN when absent
  double miou = 0;          // NaN when no class is present
  int count = 0;            // classes entering the mean
};

/// Accumulates per-class intersections and unions over any number of
/// scenes; voxels whose ground truth is in `ignore` are skipped.
class MiouAccumulator {
 public:
  explicit MiouAccumulator(int num_classes, std::vector<Label> ignore = {kIgnore});
  void add(std::span<const Label> pred, std::span<const Label> gt);
  MiouResult result() const;

 private:
  int num_classes_;
  std::vector<Label> ignore_;
  std::vector<std::int64_t> inter_, uni_;
};

MiouResult metric_miou(std::span<const Label> pred, const VoxelGrid& gt, int num_classes,
                       std::vector<Label> ignore = {kIgnore});

/// Binary IoU of two occupancy masks (1 when both are empty).
double binary_iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
/// Dice coefficient of two binary masks (1 when both are empty).
double binary_dice(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// The most frequent non-free class over GT-occupied voxels of the split,
/// painted onto every GT-occupied voxel of each scene.
Label majority_class(std::span<const VoxelGrid> gts);
std::vector<Label> majority_prediction(const VoxelGrid& gt, Label majority);

struct ScoredBox {
  int image = 0;
  int class_id = 0;
  double confidence = 1.0;
  Box2D box;
};

struct MapResult {
  double map = 0;
  std::vector<double> ap_per_class;  // indexed by class id, NaN without GT
};

/// All-point interpolated average precision per class (greedy matching by
/// confidence, highest-IoU unmatched GT), averaged over classes that have
/// ground truth and over the IoU thresholds.
MapResult metric_map(std::span<const ScoredBox> detections, std::span<const ScoredBox> gts,
                     int num_classes, std::span<const double> iou_thresholds);

}  // namespace mixocc
