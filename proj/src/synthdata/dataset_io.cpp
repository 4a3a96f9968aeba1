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

#include "synthdata/dataset_io.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mixocc {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "voxel label files are little-endian; big-endian hosts need byte swapping");

DatasetMeta meta_from_config(const SceneConfig& cfg) {
  DatasetMeta m;
  m.grid = cfg.grid;
  m.voxel_size = cfg.voxel_size;
  m.origin = cfg.origin;
  m.image_width = cfg.image_width;
  m.image_height = cfg.image_height;
  m.split = cfg.split;
  m.label_options = cfg.label_options;
  return m;
}

void write_dataset_meta(const std::string& root, const DatasetMeta& m) {
  fs::create_directories(root);
  json j = {{"format", "mixocc-dataset"},
            {"version", 1},
            {"grid", {m.grid.d, m.grid.w, m.grid.h}},
            {"voxel_size", m.voxel_size},
            {"origin", m.origin},
            {"image_size", {m.image_width, m.image_height}},
            {"foreground", m.split.foreground},
            {"background", m.split.background},
            {"cluster_threshold", m.label_options.cluster_threshold},
            {"min_visibility", m.label_options.min_visibility},
            {"splits", m.splits}};
  std::ofstream out(fs::path(root) / "dataset.json");
  if (!out) throw IoError("cannot write dataset.json in " + root);
  out << j.dump(2) << "\n";
}

DatasetMeta read_dataset_meta(const std::string& root) {
  std::ifstream in(fs::path(root) / "dataset.json");
  if (!in) throw IoError("missing dataset.json in " + root);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(std::string("dataset.json: ") + e.what());
  }
  DatasetMeta m;
  const auto g = j.at("grid").get<std::array<int, 3>>();
  m.grid = {g[0], g[1], g[2]};
  m.voxel_size = j.at("voxel_size").get<double>();
  m.origin = j.at("origin").get<Vec3>();
  const auto s = j.at("image_size").get<std::array<int, 2>>();
  m.image_width = s[0];
  m.image_height = s[1];
  m.split.foreground = j.at("foreground").get<std::vector<Label>>();
  m.split.background = j.at("background").get<std::vector<Label>>();
  m.label_options.cluster_threshold = j.value("cluster_threshold", kDefaultClusterThreshold);
  m.label_options.min_visibility = j.value("min_visibility", 0.0);
  m.splits = j.value("splits", std::vector<std::string>{});
  return m;
}

std::string scene_stem(int index) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << index;
  return os.str();
}

void write_voxel_labels(const std::string& path, const VoxelGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(grid.labels.data()),
            static_cast<std::streamsize>(grid.labels.size() * sizeof(Label)));
}

std::vector<Label> read_voxel_labels(const std::string& path, GridShape shape) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing voxel label file " + path);
  std::vector<Label> labels(static_cast<std::size_t>(shape.cells()));
  in.read(reinterpret_cast<char*>(labels.data()),
          static_cast<std::streamsize>(labels.size() * sizeof(Label)));
  if (in.gcount() != static_cast<std::streamsize>(labels.size() * sizeof(Label))) {
    throw IoError("short voxel label file " + path);
  }
  return labels;
}

void write_camera(const std::string& path, const CameraModel& cam) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << std::setprecision(17);
  const auto& r = cam.grid_to_camera.r;
  const auto& t = cam.grid_to_camera.t;
  for (int i = 0; i < 3; ++i) {
    out << r[3 * i] << ' ' << r[3 * i + 1] << ' ' << r[3 * i + 2] << ' ' << t[i] << '\n';
  }
  out << cam.fx << ' ' << cam.fy << ' ' << cam.cx << ' ' << cam.cy << '\n';
}

CameraModel read_camera(const std::string& path, int width, int height) {
  std::ifstream in(path);
  if (!in) throw IoError("missing camera file " + path);
  double v[16];
  for (double& x : v) {
    if (!(in >> x)) throw IoError("camera file " + path + " needs 16 values");
  }
  CameraModel cam;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) cam.grid_to_camera.r[3 * i + k] = v[4 * i + k];
    cam.grid_to_camera.t[i] = v[4 * i + 3];
  }
  cam.fx = v[12];
  cam.fy = v[13];
  cam.cx = v[14];
  cam.cy = v[15];
  cam.width = width;
  cam.height = height;
  return cam;
}

void write_objects(const std::string& path, const std::vector<ObjectLabel>& labels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& o : labels) {
    json rec = {{"class", o.class_id},
                {"box2d", {o.box2d.cx, o.box2d.cy, o.box2d.w, o.box2d.h}},
                {"box3d",
                 {o.box3d.center[0], o.box3d.center[1], o.box3d.center[2], o.box3d.size[0],
                  o.box3d.size[1], o.box3d.size[2]}},
                {"visibility", o.visibility}};
    out << rec.dump() << '\n';
  }
}

std::vector<ObjectLabel> read_objects(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing objects file " + path);
  std::vector<ObjectLabel> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json rec = json::parse(line);
      ObjectLabel o;
      o.class_id = rec.at("class").get<Label>();
      const auto b2 = rec.at("box2d").get<std::array<double, 4>>();
      o.box2d = {b2[0], b2[1], b2[2], b2[3]};
      const auto b3 = rec.at("box3d").get<std::array<double, 6>>();
      o.box3d = {{b3[0], b3[1], b3[2]}, {b3[3], b3[4], b3[5]}, Frame::grid};
      o.visibility = rec.at("visibility").get<double>();
      out.push_back(std::move(o));
    } catch (const json::exception& e) {
      throw IoError("objects file " + path + ": " + e.what());
    }
  }
  return out;
}

void write_scene(const std::string& split_dir, int index, const ScenePair& scene) {
  fs::create_directories(split_dir);
  const fs::path base = fs::path(split_dir) / scene_stem(index);
  write_voxel_labels(base.string() + ".label", scene.gt);
  write_camera(base.string() + ".camera", scene.camera);
  write_png(base.string() + ".png", scene.image);
  write_objects(base.string() + ".objects", scene.labels);
}

ScenePair read_scene(const std::string& split_dir, int index, const DatasetMeta& meta) {
  const fs::path base = fs::path(split_dir) / scene_stem(index);
  ScenePair sp;
  sp.gt = VoxelGrid(meta.grid, meta.voxel_size, meta.origin);
  sp.gt.labels = read_voxel_labels(base.string() + ".label", meta.grid);
  sp.image = read_png(base.string() + ".png");
  if (sp.image.width != meta.image_width || sp.image.height != meta.image_height) {
    throw IoError("image size mismatch in " + base.string() + ".png");
  }
  sp.camera = read_camera(base.string() + ".camera", sp.image.width, sp.image.height);
  sp.labels = read_objects(base.string() + ".objects");
  return sp;
}

int count_scenes(const std::string& split_dir) {
  int n = 0;
  while (fs::exists(fs::path(split_dir) / (scene_stem(n) + ".label"))) ++n;
  return n;
}

}  // namespace mixocc
