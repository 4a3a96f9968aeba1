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

// On-disk dataset layout:
//
//   <root>/dataset.json            grid geometry, image size, category split
//   <root>/<split>/NNNNNN.label    uint16 little-endian labels, (D, W, H) row-major
//   <root>/<split>/NNNNNN.camera   12 extrinsic values (3x4 [R|t], grid->camera)
//                                  followed by fx fy cx cy
//   <root>/<split>/NNNNNN.png      8-bit RGB image
//   <root>/<split>/NNNNNN.objects  one JSON record per line:
//                                  {"class", "box2d", "box3d", "visibility"}

#pragma once

#include <string>
#include <vector>

#include "synthdata/scene.hpp"

namespace mixocc {

struct DatasetMeta {
  GridShape grid;
  double voxel_size = 1.0;
  Vec3 origin{};
  int image_width = 0;
  int image_height = 0;
  CategorySplit split;
  LabelOptions label_options;
  std::vector<std::string> splits;  // e.g. {"train", "val"}
};

DatasetMeta meta_from_config(const SceneConfig& cfg);
void write_dataset_meta(const std::string& root, const DatasetMeta& meta);
DatasetMeta read_dataset_meta(const std::string& root);

std::string scene_stem(int index);

void write_voxel_labels(const std::string& path, const VoxelGrid& grid);
/// Throws IoError on a missing or short file.
std::vector<Label> read_voxel_labels(const std::string& path, GridShape shape);

void write_camera(const std::string& path, const CameraModel& cam);
CameraModel read_camera(const std::string& path, int width, int height);

void write_objects(const std::string& path, const std::vector<ObjectLabel>& labels);
std::vector<ObjectLabel> read_objects(const std::string& path);

void write_scene(const std::string& split_dir, int index, const ScenePair& scene);
ScenePair read_scene(const std::string& split_dir, int index, const DatasetMeta& meta);
/// Number of consecutive scenes NNNNNN.label present from index 0.
int count_scenes(const std::string& split_dir);

}  // namespace mixocc
