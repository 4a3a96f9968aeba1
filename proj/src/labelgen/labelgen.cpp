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

#include "labelgen/labelgen.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace mixocc {

const char* class_name(Label id) {
  static const char* names[] = {"free",       "car",          "bicycle",  "motorcycle",
                                "truck",      "other-vehicle", "person",  "bicyclist",
                                "motorcyclist", "road",        "parking", "sidewalk",
                                "other-ground", "building",    "fence",   "vegetation",
                                "trunk",      "terrain",       "pole",    "traffic-sign"};
  if (id == kIgnore) return "ignore";
  if (id <= cls::kNumSemantic) return names[id];
  return "unknown";
}

CategorySplit CategorySplit::semantickitti() {
  CategorySplit s;
  s.foreground = {cls::car,        cls::bicycle,   cls::motorcycle,   cls::truck,
                  cls::other_vehicle, cls::person, cls::bicyclist,    cls::motorcyclist,
                  cls::pole,       cls::traffic_sign};
  s.background = {cls::road,     cls::parking, cls::sidewalk,   cls::other_ground, cls::building,
                  cls::fence,    cls::vegetation, cls::trunk,   cls::terrain};
  return s;
}

bool CategorySplit::is_foreground(Label l) const { return foreground_index(l) >= 0; }
bool CategorySplit::is_background(Label l) const { return background_index(l) >= 0; }

int CategorySplit::foreground_index(Label l) const {
  auto it = std::find(foreground.begin(), foreground.end(), l);
  return it == foreground.end() ? -1 : static_cast<int>(it - foreground.begin());
}

int CategorySplit::background_index(Label l) const {
  auto it = std::find(background.begin(), background.end(), l);
  return it == background.end() ? -1 : static_cast<int>(it - background.begin());
}

void CategorySplit::validate(int num_semantic) const {
  std::vector<int> seen(num_semantic + 1, 0);
  for (auto set : {&foreground, &background}) {
    for (Label l : *set) {
      if (l == kFree || l > num_semantic) throw GeometryError("CategorySplit: class id out of range");
      if (seen[l]++) throw GeometryError("CategorySplit: class listed twice");
    }
  }
  for (int c = 1; c <= num_semantic; ++c) {
    if (!seen[c]) throw GeometryError("CategorySplit: class " + std::to_string(c) + " not covered");
  }
}

namespace {

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent[a] = b;
  }
};

}  // namespace

std::vector<std::vector<Cell>> cluster_objects(const VoxelGrid& grid, Label class_id,
                                               double threshold) {
  if (!(threshold >= 1.0)) throw GeometryError("cluster_objects: threshold must be >= 1");
  std::vector<int> slot(grid.labels.size(), -1);
  std::vector<std::int64_t> members;
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(grid.labels.size()); ++i) {
    if (grid.labels[i] == class_id) {
      slot[i] = static_cast<int>(members.size());
      members.push_back(i);
    }
  }
  if (members.empty()) return {};

  // Offsets within the threshold ball; only the "forward" half is needed.
  const int r = static_cast<int>(std::floor(threshold + 1e-9));
  const double t2 = threshold * threshold + 1e-9;
  std::vector<Cell> offsets;
  for (int dx = -r; dx <= r; ++dx) {
    for (int dy = -r; dy <= r; ++dy) {
      for (int dz = -r; dz <= r; ++dz) {
        if (dx * dx + dy * dy + dz * dz > t2) continue;
        const bool forward = dx > 0 || (dx == 0 && (dy > 0 || (dy == 0 && dz > 0)));
        if (forward) offsets.push_back({dx, dy, dz});
      }
    }
  }

  DisjointSet ds(static_cast<int>(members.size()));
  for (std::size_t m = 0; m < members.size(); ++m) {
    const Cell c = grid.cell_of(members[m]);
    for (const Cell& o : offsets) {
      const int x = c[0] + o[0], y = c[1] + o[1], z = c[2] + o[2];
      if (!grid.contains(x, y, z)) continue;
      const int other = slot[grid.index(x, y, z)];
      if (other >= 0) ds.unite(static_cast<int>(m), other);
    }
  }

  // Roots are the smallest member index of each set, so iterating members in
  // order emits clusters ordered by first voxel.
  std::vector<int> cluster_of_root(members.size(), -1);
  std::vector<std::vector<Cell>> clusters;
  for (std::size_t m = 0; m < members.size(); ++m) {
    const int root = ds.find(static_cast<int>(m));
    if (cluster_of_root[root] < 0) {
      cluster_of_root[root] = static_cast<int>(clusters.size());
      clusters.emplace_back();
    }
    clusters[cluster_of_root[root]].push_back(grid.cell_of(members[m]));
  }
  return clusters;
}

BinaryGrid visibility_mask(const CameraModel& camera, const VoxelGrid& grid) {
  const BinaryGrid occ = occupancy(grid);
  BinaryGrid vis(grid.shape);
  const Vec3 cam_w = camera.position_in_grid();
  // Camera position in continuous voxel coordinates.
  Vec3 cam;
  for (int a = 0; a < 3; ++a) cam[a] = (cam_w[a] - grid.origin[a]) / grid.voxel_size;
  const int n[3] = {grid.shape.d, grid.shape.w, grid.shape.h};
  constexpr double kTie = 1e-9;

  for (int x = 0; x < n[0]; ++x) {
    for (int y = 0; y < n[1]; ++y) {
      for (int z = 0; z < n[2]; ++z) {
        const Projection pr = project_point(camera, grid.voxel_center(x, y, z));
        if (!pr.inside_image(camera)) continue;

        // Amanatides-Woo traversal from the voxel center toward the camera,
        // parameterised by t in [0, 1]. Axes whose boundary crossings tie are
        // stepped together so that edge/corner grazes are not counted.
        const Vec3 start{x + 0.5, y + 0.5, z + 0.5};
        int cell[3] = {x, y, z};
        int step[3];
        double t_max[3], t_delta[3];
        for (int a = 0; a < 3; ++a) {
          const double d = cam[a] - start[a];
          if (d > 0) {
            step[a] = 1;
            t_delta[a] = 1.0 / d;
            t_max[a] = (cell[a] + 1 - start[a]) / d;
          } else if (d < 0) {
            step[a] = -1;
            t_delta[a] = -1.0 / d;
            t_max[a] = (cell[a] - start[a]) / d;
          } else {
            step[a] = 0;
            t_delta[a] = std::numeric_limits<double>::infinity();
            t_max[a] = std::numeric_limits<double>::infinity();
          }
        }
        bool blocked = false;
        while (true) {
          const double t = std::min({t_max[0], t_max[1], t_max[2]});
          if (t >= 1.0 - kTie) break;  // reached the camera
          bool outside = false;
          for (int a = 0; a < 3; ++a) {
            if (t_max[a] <= t + kTie) {
              cell[a] += step[a];
              t_max[a] += t_delta[a];
              if (cell[a] < 0 || cell[a] >= n[a]) outside = true;
            }
          }
          if (outside) break;
          if (occ.at(cell[0], cell[1], cell[2])) {
            blocked = true;
            break;
          }
        }
        if (!blocked) vis.cells[vis.index(x, y, z)] = 1;
      }
    }
  }
  return vis;
}

std::vector<ObjectLabel> extract_labels(const VoxelGrid& scene, const CameraModel& camera,
                                        const CategorySplit& split, const LabelOptions& opts) {
  return extract_labels(scene, camera, split, visibility_mask(camera, scene), opts);
}

std::vector<ObjectLabel> extract_labels(const VoxelGrid& scene, const CameraModel& camera,
                                        const CategorySplit& split, const BinaryGrid& visible,
                                        const LabelOptions& opts) {
  std::vector<Label> classes = split.foreground;
  std::sort(classes.begin(), classes.end());
  std::vector<ObjectLabel> out;
  for (Label c : classes) {
    for (auto& voxels : cluster_objects(scene, c, opts.cluster_threshold)) {
      std::int64_t n_vis = 0;
      for (const Cell& v : voxels) n_vis += visible.at(v[0], v[1], v[2]);
      const double visibility = static_cast<double>(n_vis) / static_cast<double>(voxels.size());
      if (!(visibility > opts.min_visibility)) continue;

      Cell lo = voxels.front(), hi = voxels.front();
      for (const Cell& v : voxels) {
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], v[a]);
          hi[a] = std::max(hi[a], v[a]);
        }
      }
      const double vs = scene.voxel_size;
      const Vec3 blo{scene.origin[0] + lo[0] * vs, scene.origin[1] + lo[1] * vs,
                     scene.origin[2] + lo[2] * vs};
      const Vec3 bhi{scene.origin[0] + (hi[0] + 1) * vs, scene.origin[1] + (hi[1] + 1) * vs,
                     scene.origin[2] + (hi[2] + 1) * vs};

      // Amodal 2D box: hull of the projected corners of every voxel.
      double u0 = std::numeric_limits<double>::infinity(), v0 = u0, u1 = -u0, v1 = -u0;
      for (const Cell& v : voxels) {
        const Box3D vb = scene.voxel_box(v[0], v[1], v[2]);
        const Vec3 a = vb.min(), b = vb.max();
        for (int k = 0; k < 8; ++k) {
          const Projection p =
              project_point(camera, {(k & 1) ? b[0] : a[0], (k & 2) ? b[1] : a[1], (k & 4) ? b[2] : a[2]});
          if (p.out_of_view) continue;
          u0 = std::min(u0, p.u);
          v0 = std::min(v0, p.v);
          u1 = std::max(u1, p.u);
          v1 = std::max(v1, p.v);
        }
      }
      u0 = std::clamp(u0, 0.0, static_cast<double>(camera.width));
      u1 = std::clamp(u1, 0.0, static_cast<double>(camera.width));
      v0 = std::clamp(v0, 0.0, static_cast<double>(camera.height));
      v1 = std::clamp(v1, 0.0, static_cast<double>(camera.height));
      if (!(u1 > u0 && v1 > v0)) continue;

      ObjectLabel obj;
      obj.class_id = c;
      obj.voxels = std::move(voxels);
      obj.box3d = Box3D::from_corners(blo, bhi, Frame::grid);
      obj.box2d = Box2D::from_corners(u0, v0, u1, v1);
      obj.visibility = visibility;
      out.push_back(std::move(obj));
    }
  }
  return out;
}

}  // namespace mixocc
