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

#include "synthdata/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mixocc {

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  if (hi <= lo) return lo;
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(rng() % span);
}

double uniform_real(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

SceneConfig SceneConfig::toy() {
  SceneConfig c;
  c.objects = {
      {cls::car, 1, 3, {5, 3, 2}, {6, 3, 2}, Placement::road},
      {cls::truck, 0, 1, {7, 3, 3}, {8, 3, 3}, Placement::road},
      {cls::person, 0, 2, {2, 2, 3}, {2, 2, 3}, Placement::sidewalk},
  };
  c.palette = {
      {135, 206, 235},  // sky
      {100, 150, 245}, {100, 230, 245}, {30, 60, 150},  {80, 30, 180},  {100, 80, 250},
      {255, 30, 30},   {255, 40, 200},  {150, 30, 90},  {255, 0, 255},  {255, 150, 255},
      {75, 0, 75},     {175, 0, 75},    {255, 200, 0},  {255, 120, 50}, {0, 175, 0},
      {135, 60, 0},    {150, 240, 80},  {255, 240, 150}, {255, 0, 0},
  };
  return c;
}

void SceneConfig::validate() const {
  if (grid.d <= 0 || grid.w <= 0 || grid.h <= 0) throw GeometryError("scene: bad grid shape");
  const int f = 1 << decoder_levels;
  if (grid.d % f || grid.w % f || grid.h % f) {
    throw GeometryError("scene: grid shape must be divisible by 2^decoder_levels");
  }
  if (!(voxel_size > 0)) throw GeometryError("scene: voxel size must be positive");
  if (image_width <= 0 || image_height <= 0) throw GeometryError("scene: bad image size");
  if (static_cast<int>(palette.size()) <= cls::kNumSemantic) {
    throw GeometryError("scene: palette needs one color per class plus the sky");
  }
  if (ground_height < 1 || ground_height >= grid.h) throw GeometryError("scene: bad ground height");
  for (const auto& o : objects) {
    if (!split.is_foreground(o.class_id)) throw GeometryError("scene: object class is not foreground");
    if (o.min_count < 0 || o.max_count < o.min_count) throw GeometryError("scene: bad object counts");
    for (int a = 0; a < 3; ++a) {
      if (o.min_size[a] < 1 || o.max_size[a] < o.min_size[a]) {
        throw GeometryError("scene: bad object size range");
      }
    }
  }
  split.validate(cls::kNumSemantic);
  camera().validate();
}

CameraModel SceneConfig::camera() const {
  CameraModel cam;
  cam.fx = cam.fy = focal;
  cam.cx = principal_u;
  cam.cy = principal_v;
  cam.width = image_width;
  cam.height = image_height;
  // Grid axes (x forward, y left, z up) to camera axes (x right, y down,
  // z forward), followed by a pitch about the camera x axis.
  const double p = camera_pitch_deg * std::numbers::pi / 180.0;
  const double c = std::cos(p), s = std::sin(p);
  // base rows: cam_x = -y, cam_y = -z, cam_z = x
  const std::array<double, 9> base{0, -1, 0, 0, 0, -1, 1, 0, 0};
  const std::array<double, 9> pitch{1, 0, 0, 0, c, -s, 0, s, c};
  std::array<double, 9> r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) r[3 * i + j] += pitch[3 * i + k] * base[3 * k + j];
    }
  }
  cam.grid_to_camera.r = r;
  const Vec3 rp = cam.grid_to_camera.rotate(camera_position);
  cam.grid_to_camera.t = {-rp[0], -rp[1], -rp[2]};
  return cam;
}

namespace {

struct Reserved {
  BinaryGrid mask;
  explicit Reserved(GridShape s) : mask(s) {}
  bool free_box(const VoxelGrid& g, const Cell& lo, const Cell& size) const {
    for (int x = lo[0]; x < lo[0] + size[0]; ++x)
      for (int y = lo[1]; y < lo[1] + size[1]; ++y)
        for (int z = lo[2]; z < lo[2] + size[2]; ++z) {
          if (!g.contains(x, y, z)) return false;
          if (g.at(x, y, z) != kFree || mask.at(x, y, z)) return false;
        }
    return true;
  }
  void reserve(const VoxelGrid& g, const Cell& lo, const Cell& size, int margin) {
    for (int x = lo[0] - margin; x < lo[0] + size[0] + margin; ++x)
      for (int y = lo[1] - margin; y < lo[1] + size[1] + margin; ++y)
        for (int z = lo[2] - margin; z < lo[2] + size[2] + margin; ++z)
          if (g.contains(x, y, z)) mask.cells[mask.index(x, y, z)] = 1;
  }
};

void fill_box(VoxelGrid& g, const Cell& lo, const Cell& size, Label l) {
  for (int x = lo[0]; x < lo[0] + size[0]; ++x)
    for (int y = lo[1]; y < lo[1] + size[1]; ++y)
      for (int z = lo[2]; z < lo[2] + size[2]; ++z)
        if (g.contains(x, y, z)) g.at(x, y, z) = l;
}

}  // namespace

ScenePair generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ScenePair sp;
  sp.camera = cfg.camera();
  VoxelGrid& g = sp.gt;
  g = VoxelGrid(cfg.grid, cfg.voxel_size, cfg.origin);
  const int D = cfg.grid.d, W = cfg.grid.w, H = cfg.grid.h, gh = cfg.ground_height;

  // Ground: road strip along x with sidewalks on both sides, terrain elsewhere.
  const int yc = W / 2 + uniform_int(rng, -cfg.road_jitter, cfg.road_jitter);
  const int road_lo = std::clamp(yc - cfg.road_width / 2, 0, W);
  const int road_hi = std::clamp(road_lo + cfg.road_width, 0, W);
  const int walk_lo = std::max(0, road_lo - cfg.sidewalk_width);
  const int walk_hi = std::min(W, road_hi + cfg.sidewalk_width);
  for (int x = 0; x < D; ++x) {
    for (int y = 0; y < W; ++y) {
      Label l = cls::terrain;
      if (y >= road_lo && y < road_hi) l = cls::road;
      else if (y >= walk_lo && y < walk_hi) l = cls::sidewalk;
      for (int z = 0; z < gh; ++z) g.at(x, y, z) = l;
    }
  }

  Reserved reserved(cfg.grid);

  // Buildings along the outer edges, beyond the sidewalks.
  for (int side = 0; side < 2; ++side) {
    if (!(uniform_real(rng) < cfg.wall_probability)) continue;
    const int thickness = 1;
    const int length = uniform_int(rng, D / 4, D / 2);
    const int x0 = uniform_int(rng, D / 4, D - length);
    const int height = uniform_int(rng, std::min(2, H - gh), std::min(4, H - gh));
    const int y0 = side == 0 ? 0 : W - thickness;
    if (side == 0 && thickness > walk_lo) continue;
    if (side == 1 && y0 < walk_hi) continue;
    const Cell lo{x0, y0, gh}, size{length, thickness, height};
    fill_box(g, lo, size, cls::building);
    reserved.reserve(g, lo, size, 1);
  }

  // Foreground objects, kept one voxel apart from each other.
  for (const ObjectSpec& spec : cfg.objects) {
    const int count = uniform_int(rng, spec.min_count, spec.max_count);
    for (int n = 0; n < count; ++n) {
      bool placed = false;
      for (int attempt = 0; attempt < cfg.placement_retries && !placed; ++attempt) {
        Cell size;
        for (int a = 0; a < 3; ++a) size[a] = uniform_int(rng, spec.min_size[a], spec.max_size[a]);
        int ylo, yhi;
        if (spec.placement == Placement::road) {
          ylo = road_lo;
          yhi = road_hi - size[1];
        } else if (uniform_int(rng, 0, 1) == 0) {
          ylo = walk_lo;
          yhi = road_lo - size[1];
        } else {
          ylo = road_hi;
          yhi = walk_hi - size[1];
        }
        if (yhi < ylo || D - size[0] < 2) continue;
        const Cell lo{uniform_int(rng, 2, D - size[0]), uniform_int(rng, ylo, yhi), gh};
        if (!reserved.free_box(g, lo, size)) continue;
        fill_box(g, lo, size, spec.class_id);
        reserved.reserve(g, lo, size, 1);
        placed = true;
      }
      if (!placed) sp.placement_failed = true;
    }
  }

  // Vegetation on terrain until the occupancy target is met.
  const double target = cfg.target_occupancy * static_cast<double>(g.shape.cells());
  const double tol = cfg.occupancy_tolerance * target;
  std::int64_t occupied = occupancy(g).count();
  for (int attempt = 0; attempt < 20000 && occupied < target - 0.5 * tol; ++attempt) {
    Cell size{uniform_int(rng, 1, 2), uniform_int(rng, 1, 2), uniform_int(rng, 1, 3)};
    const Cell lo{uniform_int(rng, 0, D - size[0]), uniform_int(rng, 0, W - size[1]), gh};
    bool on_terrain = true;
    for (int x = lo[0]; x < lo[0] + size[0] && on_terrain; ++x)
      for (int y = lo[1]; y < lo[1] + size[1]; ++y)
        if (g.at(x, y, gh - 1) != cls::terrain) on_terrain = false;
    if (!on_terrain) continue;
    while (size[2] > 0 && occupied + size[0] * size[1] * size[2] > target + 0.5 * tol) --size[2];
    if (size[2] == 0 || !reserved.free_box(g, lo, size)) continue;
    fill_box(g, lo, size, cls::vegetation);
    occupied += size[0] * size[1] * size[2];
  }

  sp.image = render_scene(g, sp.camera, cfg.palette);
  sp.labels = extract_labels(g, sp.camera, cfg.split, cfg.label_options);
  return sp;
}

Image render_scene(const VoxelGrid& grid, const CameraModel& camera,
                   const std::vector<Rgb8>& palette) {
  Image img(camera.width, camera.height);
  auto color = [&](Label l) {
    const Rgb8 c = l < palette.size() ? palette[l] : Rgb8{128, 128, 128};
    return std::array<float, 3>{c[0] / 255.f, c[1] / 255.f, c[2] / 255.f};
  };
  const auto sky = color(0);
  for (int i = 0; i < camera.width * camera.height; ++i) {
    std::copy(sky.begin(), sky.end(), img.rgb.begin() + 3 * i);
  }

  const Vec3 cam = camera.position_in_grid();
  struct Item {
    double dist;
    std::int64_t idx;
  };
  std::vector<Item> items;
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(grid.labels.size()); ++i) {
    const Label l = grid.labels[i];
    if (l == kFree || l == kIgnore) continue;
    const Cell c = grid.cell_of(i);
    const Vec3 p = grid.voxel_center(c[0], c[1], c[2]);
    const double d = std::hypot(p[0] - cam[0], p[1] - cam[1], p[2] - cam[2]);
    items.push_back({d, i});
  }
  // Far to near; equal distances fall back to index order.
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    return a.dist != b.dist ? a.dist > b.dist : a.idx < b.idx;
  });

  std::array<std::array<double, 2>, 8> pts;
  std::array<std::array<double, 2>, 16> hull;
  for (const Item& it : items) {
    const Cell c = grid.cell_of(it.idx);
    const Box3D vb = grid.voxel_box(c[0], c[1], c[2]);
    const Vec3 a = vb.min(), b = vb.max();
    bool behind = false;
    for (int k = 0; k < 8; ++k) {
      const Projection p =
          project_point(camera, {(k & 1) ? b[0] : a[0], (k & 2) ? b[1] : a[1], (k & 4) ? b[2] : a[2]});
      if (p.out_of_view || p.depth < 1e-6) {
        behind = true;
        break;
      }
      pts[k] = {p.u, p.v};
    }
    if (behind) continue;

    // Monotone-chain convex hull, counter-clockwise in (u, v).
    std::sort(pts.begin(), pts.end());
    auto cross = [](const std::array<double, 2>& o, const std::array<double, 2>& p,
                    const std::array<double, 2>& q) {
      return (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0]);
    };
    int k = 0;
    for (int i = 0; i < 8; ++i) {
      while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
      hull[k++] = pts[i];
    }
    for (int i = 6, t = k + 1; i >= 0; --i) {
      while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
      hull[k++] = pts[i];
    }
    const int nh = k - 1;
    if (nh < 3) continue;

    double umin = hull[0][0], umax = umin, vmin = hull[0][1], vmax = vmin;
    for (int i = 1; i < nh; ++i) {
      umin = std::min(umin, hull[i][0]);
      umax = std::max(umax, hull[i][0]);
      vmin = std::min(vmin, hull[i][1]);
      vmax = std::max(vmax, hull[i][1]);
    }
    const int x0 = std::max(0, static_cast<int>(std::floor(umin)));
    const int x1 = std::min(camera.width - 1, static_cast<int>(std::ceil(umax)));
    const int y0 = std::max(0, static_cast<int>(std::floor(vmin)));
    const int y1 = std::min(camera.height - 1, static_cast<int>(std::ceil(vmax)));
    const auto col = color(grid.labels[it.idx]);
    for (int py = y0; py <= y1; ++py) {
      for (int px = x0; px <= x1; ++px) {
        const std::array<double, 2> q{px + 0.5, py + 0.5};
        bool inside = true;
        for (int i = 0; i < nh && inside; ++i) {
          if (cross(hull[i], hull[(i + 1) % nh], q) < 0) inside = false;
        }
        if (!inside) continue;
        float* dst = img.pixel(px, py);
        dst[0] = col[0];
        dst[1] = col[1];
        dst[2] = col[2];
      }
    }
  }
  return img;
}

// JSON ------------------------------------------------------------------------

namespace {

const char* placement_name(Placement p) { return p == Placement::road ? "road" : "sidewalk"; }

Placement placement_from(const std::string& s) {
  if (s == "road") return Placement::road;
  if (s == "sidewalk") return Placement::sidewalk;
  throw GeometryError("scene: unknown placement '" + s + "'");
}

}  // namespace

void to_json(nlohmann::json& j, const SceneConfig& c) {
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : c.objects) {
    objs.push_back({{"class", o.class_id},
                    {"count", {o.min_count, o.max_count}},
                    {"min_size", o.min_size},
                    {"max_size", o.max_size},
                    {"placement", placement_name(o.placement)}});
  }
  j = {{"grid", {c.grid.d, c.grid.w, c.grid.h}},
       {"voxel_size", c.voxel_size},
       {"origin", c.origin},
       {"image_size", {c.image_width, c.image_height}},
       {"focal", c.focal},
       {"principal_point", {c.principal_u, c.principal_v}},
       {"camera_position", c.camera_position},
       {"camera_pitch_deg", c.camera_pitch_deg},
       {"ground_height", c.ground_height},
       {"road_width", c.road_width},
       {"sidewalk_width", c.sidewalk_width},
       {"road_jitter", c.road_jitter},
       {"wall_probability", c.wall_probability},
       {"target_occupancy", c.target_occupancy},
       {"occupancy_tolerance", c.occupancy_tolerance},
       {"placement_retries", c.placement_retries},
       {"decoder_levels", c.decoder_levels},
       {"objects", objs},
       {"palette", c.palette},
       {"foreground", c.split.foreground},
       {"background", c.split.background},
       {"cluster_threshold", c.label_options.cluster_threshold},
       {"min_visibility", c.label_options.min_visibility}};
}

void from_json(const nlohmann::json& j, SceneConfig& c) {
  c = SceneConfig::toy();
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) j.at(key).get_to(dst);
  };
  if (j.contains("grid")) {
    const auto g = j.at("grid").get<std::array<int, 3>>();
    c.grid = {g[0], g[1], g[2]};
  }
  get("voxel_size", c.voxel_size);
  get("origin", c.origin);
  if (j.contains("image_size")) {
    const auto s = j.at("image_size").get<std::array<int, 2>>();
    c.image_width = s[0];
    c.image_height = s[1];
  }
  get("focal", c.focal);
  if (j.contains("principal_point")) {
    const auto p = j.at("principal_point").get<std::array<double, 2>>();
    c.principal_u = p[0];
    c.principal_v = p[1];
  }
  get("camera_position", c.camera_position);
  get("camera_pitch_deg", c.camera_pitch_deg);
  get("ground_height", c.ground_height);
  get("road_width", c.road_width);
  get("sidewalk_width", c.sidewalk_width);
  get("road_jitter", c.road_jitter);
  get("wall_probability", c.wall_probability);
  get("target_occupancy", c.target_occupancy);
  get("occupancy_tolerance", c.occupancy_tolerance);
  get("placement_retries", c.placement_retries);
  get("decoder_levels", c.decoder_levels);
  if (j.contains("objects")) {
    c.objects.clear();
    for (const auto& o : j.at("objects")) {
      ObjectSpec s;
      s.class_id = o.at("class").get<Label>();
      const auto n = o.at("count").get<std::array<int, 2>>();
      s.min_count = n[0];
      s.max_count = n[1];
      s.min_size = o.at("min_size").get<Cell>();
      s.max_size = o.at("max_size").get<Cell>();
      s.placement = placement_from(o.value("placement", std::string("road")));
      c.objects.push_back(s);
    }
  }
  get("palette", c.palette);
  get("foreground", c.split.foreground);
  get("background", c.split.background);
  get("cluster_threshold", c.label_options.cluster_threshold);
  get("min_visibility", c.label_options.min_visibility);
}

}  // namespace mixocc
