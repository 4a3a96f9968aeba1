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

#include "synthdata/semantickitti.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "synthdata/dataset_io.hpp"

namespace mixocc {

namespace fs = std::filesystem;

LabelRemap semantickitti_learning_map() {
  return {{0, 0},    {1, 0},    {10, 1},   {11, 2},   {13, 5},   {15, 3},   {16, 5},
          {18, 4},   {20, 5},   {30, 6},   {31, 7},   {32, 8},   {40, 9},   {44, 10},
          {48, 11},  {49, 12},  {50, 13},  {51, 14},  {52, 0},   {60, 9},   {70, 15},
          {71, 16},  {72, 17},  {80, 18},  {81, 19},  {99, 0},   {252, 1},  {253, 7},
          {254, 6},  {255, 8},  {256, 5},  {257, 5},  {258, 4},  {259, 5}};
}

namespace {

std::array<double, 12> read_calib_row(const std::string& path, const std::string& key) {
  std::ifstream in(path);
  if (!in) throw IoError("missing calibration file " + path);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key + ":") continue;
    std::array<double, 12> v{};
    for (double& x : v) {
      if (!(ls >> x)) throw IoError("calibration row " + key + " in " + path + " is short");
    }
    return v;
  }
  throw IoError("calibration row " + key + " not found in " + path);
}

// Gram-Schmidt on the rows; calibration rotations are only orthonormal to
// about 1e-6.
void orthonormalize(std::array<double, 9>& r) {
  auto row = [&](int i) { return Vec3{r[3 * i], r[3 * i + 1], r[3 * i + 2]}; };
  auto set = [&](int i, const Vec3& v) {
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    for (int k = 0; k < 3; ++k) r[3 * i + k] = v[k] / n;
  };
  auto dot = [](const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; };
  set(0, row(0));
  Vec3 r1 = row(1);
  const Vec3 r0 = row(0);
  const double d01 = dot(r1, r0);
  for (int k = 0; k < 3; ++k) r1[k] -= d01 * r0[k];
  set(1, r1);
  const Vec3 a = row(0), b = row(1);
  set(2, {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]});
}

}  // namespace

ScenePair load_semantickitti(const std::string& sequence_dir, int frame_id,
                             const LabelRemap& remap, const CategorySplit& split,
                             const LabelOptions& opts) {
  const std::string stem = scene_stem(frame_id);
  const fs::path seq(sequence_dir);

  ScenePair sp;
  sp.gt = VoxelGrid(kSemanticKittiGrid, kSemanticKittiVoxelSize, kSemanticKittiOrigin);
  const auto raw = read_voxel_labels((seq / "voxels" / (stem + ".label")).string(),
                                     kSemanticKittiGrid);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto it = remap.find(raw[i]);
    if (it == remap.end()) {
      throw IoError("label id " + std::to_string(raw[i]) + " has no remap entry (" + stem + ")");
    }
    sp.gt.labels[i] = it->second;
  }

  const fs::path invalid = seq / "voxels" / (stem + ".invalid");
  if (fs::exists(invalid)) {
    std::ifstream in(invalid, std::ios::binary);
    std::vector<unsigned char> packed((raw.size() + 7) / 8);
    in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
    if (in.gcount() != static_cast<std::streamsize>(packed.size())) {
      throw IoError("short invalid mask " + invalid.string());
    }
    // Bits are packed most-significant first.
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if ((packed[i / 8] >> (7 - i % 8)) & 1) sp.gt.labels[i] = kIgnore;
    }
  }

  sp.image = read_png((seq / "image_2" / (stem + ".png")).string());

  const std::string calib = (seq / "calib.txt").string();
  const auto p2 = read_calib_row(calib, "P2");
  const auto tr = read_calib_row(calib, "Tr");
  CameraModel cam;
  cam.fx = p2[0];
  cam.cx = p2[2];
  cam.fy = p2[5];
  cam.cy = p2[6];
  cam.width = sp.image.width;
  cam.height = sp.image.height;
  // P2 = K [I | t2]; recover t2 = K^-1 p4 (K upper triangular, zero skew).
  const double t2z = p2[11];
  const double t2y = (p2[7] - cam.cy * t2z) / cam.fy;
  const double t2x = (p2[3] - p2[1] * t2y - cam.cx * t2z) / cam.fx;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) cam.grid_to_camera.r[3 * i + k] = tr[4 * i + k];
  }
  orthonormalize(cam.grid_to_camera.r);
  cam.grid_to_camera.t = {tr[3] + t2x, tr[7] + t2y, tr[11] + t2z};
  cam.validate();
  sp.camera = cam;

  sp.labels = extract_labels(sp.gt, sp.camera, split, opts);
  return sp;
}

void write_semantickitti_labels(const std::string& path, const std::vector<std::uint16_t>& raw) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(std::uint16_t)));
}

}  // namespace mixocc
