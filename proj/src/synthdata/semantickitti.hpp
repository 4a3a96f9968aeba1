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

#include <cstdint>
#include <map>
#include <string>

#include "synthdata/scene.hpp"

namespace mixocc {

// Raw SemanticKITTI label id -> learning id (kIgnore for excluded voxels).
using LabelRemap = std::map<std::uint16_t, Label>;

/// The dataset's standard learning map (moving classes folded into static).
LabelRemap semantickitti_learning_map();

inline constexpr GridShape kSemanticKittiGrid{256, 256, 32};
inline constexpr double kSemanticKittiVoxelSize = 0.2;
inline const Vec3 kSemanticKittiOrigin{0.0, -25.6, -2.0};

/// Reads one frame from a sequence directory laid out as
///   <seq>/voxels/FFFFFF.label   (uint16, 256x256x32)
///   <seq>/voxels/FFFFFF.invalid (optional, bit-packed)
///   <seq>/image_2/FFFFFF.png
///   <seq>/calib.txt             (P2 and Tr rows)
/// The grid frame is the LiDAR frame. Labels are remapped; ids missing from
/// the remap raise IoError. Objects are extracted with `split`.
ScenePair load_semantickitti(const std::string& sequence_dir, int frame_id,
                             const LabelRemap& remap,
                             const CategorySplit& split = CategorySplit::semantickitti(),
                             const LabelOptions& opts = {});

/// Inverse of the label layout above: raw ids are written as given.
void write_semantickitti_labels(const std::string& path, const std::vector<std::uint16_t>& raw);

}  // namespace mixocc
