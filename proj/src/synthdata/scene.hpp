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

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "json.hpp"
#include "geometry/geometry.hpp"
#include "labelgen/labelgen.hpp"
#include "synthdata/image_io.hpp"

namespace mixocc {

enum class Placement { road, sidewalk };

struct ObjectSpec {
  Label class_id = cls::car;
  int min_count = 0;
  int max_count = 0;
  Cell min_size{1, 1, 1};  // voxels along (x, y, z)
  Cell max_size{1, 1, 1};
  Placement placement = Placement::road;
};

using Rgb8 = std::array<std::uint8_t, 3>;

struct SceneConfig {
  GridShape grid{32, 32, 8};
  double voxel_size = 0.5;
  Vec3 origin{0, 0, 0};
  int image_width = 64;
  int image_height = 64;
  double focal = 48.0;
  double principal_u = 32.0;
  double principal_v = 22.0;
  Vec3 camera_position{0.0, 8.0, 1.8};  // grid frame, meters
  double camera_pitch_deg = 0.0;        // positive tilts the view down
  int ground_height = 1;
  int road_width = 8;
  int sidewalk_width = 3;
  int road_jitter = 3;
  double wall_probability = 0.5;
  double target_occupancy = 0.17;  // fraction of non-free voxels
  double occupancy_tolerance = 0.05;  // relative
  int placement_retries = 50;
  int decoder_levels = 2;
  std::vector<ObjectSpec> objects;
  std::vector<Rgb8> palette;  // index = class id; palette[0] is the sky
  CategorySplit split = CategorySplit::semantickitti();
  LabelOptions label_options;

  static SceneConfig toy();
  /// Throws GeometryError on inconsistent settings.
  void validate() const;
  CameraModel camera() const;
};

void to_json(nlohmann::json& j, const SceneConfig& c);
void from_json(const nlohmann::json& j, SceneConfig& c);

struct ScenePair {
  Image image;
  CameraModel camera;
  VoxelGrid gt;
  std::vector<ObjectLabel> labels;
  bool placement_failed = false;
};

/// Deterministic in (cfg, seed).
ScenePair generate_scene(const SceneConfig& cfg, std::uint64_t seed);

/// Flat-shaded painter's-algorithm rendering of every occupied voxel.
Image render_scene(const VoxelGrid& grid, const CameraModel& camera,
                   const std::vector<Rgb8>& palette);

/// Portable integer draw in [lo, hi] from a 64-bit Mersenne twister.
int uniform_int(std::mt19937_64& rng, int lo, int hi);
double uniform_real(std::mt19937_64& rng);

}  // namespace mixocc
