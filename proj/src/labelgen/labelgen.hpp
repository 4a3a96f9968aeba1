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

#include <cmath>
#include <string>
#include <vector>

#include "geometry/geometry.hpp"

namespace mixocc {

// SemanticKITTI learning ids. 0 is free space, 255 is ignore.
namespace cls {
inline constexpr Label car = 1, bicycle = 2, motorcycle = 3, truck = 4, other_vehicle = 5,
                       person = 6, bicyclist = 7, motorcyclist = 8, road = 9, parking = 10,
                       sidewalk = 11, other_ground = 12, building = 13, fence = 14,
                       vegetation = 15, trunk = 16, terrain = 17, pole = 18, traffic_sign = 19;
inline constexpr int kNumSemantic = 19;
}  // namespace cls

const char* class_name(Label id);

struct CategorySplit {
  std::vector<Label> foreground;
  std::vector<Label> background;

  /// Ten foreground classes (vehicles, people, pole, traffic-sign) and nine
  /// background classes (ground types, structures, vegetation).
  static CategorySplit semantickitti();
  bool is_foreground(Label l) const;
  bool is_background(Label l) const;
  int foreground_index(Label l) const;  // -1 if absent
  int background_index(Label l) const;
  /// Throws unless the sets are disjoint and cover 1..num_semantic.
  void validate(int num_semantic) const;
};

struct ObjectLabel {
  Label class_id = kFree;
  std::vector<Cell> voxels;  // empty when read back from disk
  Box3D box3d;               // grid frame, tight voxel hull
  Box2D box2d;               // pixels, clipped to the image
  double visibility = 0;     // fraction of voxels visible
};

inline const double kDefaultClusterThreshold = std::sqrt(3.0);

/// Single-linkage clusters of `class_id` voxels where chained neighbours lie
/// within `threshold` voxel units. Clusters are ordered by their first voxel
/// in row-major order; voxels inside a cluster are sorted the same way.
std::vector<std::vector<Cell>> cluster_objects(const VoxelGrid& grid, Label class_id,
                                               double threshold = kDefaultClusterThreshold);

/// A voxel is visible when its center projects into the image and the
/// segment from its center to the camera crosses no other occupied voxel.
BinaryGrid visibility_mask(const CameraModel& camera, const VoxelGrid& grid);

struct LabelOptions {
  double cluster_threshold = kDefaultClusterThreshold;
  double min_visibility = 0.0;  // objects need visibility > min_visibility
};

std::vector<ObjectLabel> extract_labels(const VoxelGrid& scene, const CameraModel& camera,
                                        const CategorySplit& split,
                                        const LabelOptions& opts = {});

/// Overload that reuses a precomputed visibility mask.
std::vector<ObjectLabel> extract_labels(const VoxelGrid& scene, const CameraModel& camera,
                                        const CategorySplit& split, const BinaryGrid& visible,
                                        const LabelOptions& opts);

}  // namespace mixocc
