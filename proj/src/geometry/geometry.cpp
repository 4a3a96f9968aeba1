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

#include "geometry/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixocc {

const char* frame_name(Frame f) { return f == Frame::camera ? "camera" : "grid"; }

Box2D Box2D::from_corners(double x0, double y0, double x1, double y1) {
  return {0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0};
}

Vec3 Box3D::min() const {
  return {center[0] - 0.5 * size[0], center[1] - 0.5 * size[1], center[2] - 0.5 * size[2]};
}

Vec3 Box3D::max() const {
  return {center[0] + 0.5 * size[0], center[1] + 0.5 * size[1], center[2] + 0.5 * size[2]};
}

Box3D Box3D::from_corners(const Vec3& lo, const Vec3& hi, Frame frame) {
  Box3D b;
  for (int i = 0; i < 3; ++i) {
    b.center[i] = 0.5 * (lo[i] + hi[i]);
    b.size[i] = hi[i] - lo[i];
  }
  b.frame = frame;
  return b;
}

AlignedBox<2> aligned(const Box2D& b) { return {{b.x0(), b.y0()}, {b.x1(), b.y1()}}; }

AlignedBox<3> aligned(const Box3D& b) { return {b.min(), b.max()}; }

double giou(const Box2D& a, const Box2D& b) { return giou(aligned(a), aligned(b)); }

double iou(const Box2D& a, const Box2D& b) { return iou(aligned(a), aligned(b)); }

double giou(const Box3D& a, const Box3D& b) {
  if (a.frame != b.frame) {
    throw GeometryError(std::string("giou: frame mismatch (") + frame_name(a.frame) + " vs " +
                        frame_name(b.frame) + ")");
  }
  return giou(aligned(a), aligned(b));
}

Box3D enlarge_box(const Box3D& b, double factor) {
  if (!(factor > -1.0)) throw GeometryError("enlarge_box: factor must be > -1");
  Box3D out = b;
  for (auto& s : out.size) s *= 1.0 + factor;
  return out;
}

std::array<Box3D, 8> subdivide_box(const Box3D& b) {
  std::array<Box3D, 8> children;
  const Vec3 lo = b.min();
  const Vec3 half{0.5 * b.size[0], 0.5 * b.size[1], 0.5 * b.size[2]};
  for (int c = 0; c < 8; ++c) {
    const int bit[3] = {c & 1, (c >> 1) & 1, (c >> 2) & 1};
    Box3D& ch = children[c];
    ch.frame = b.frame;
    ch.size = half;
    for (int a = 0; a < 3; ++a) ch.center[a] = lo[a] + (bit[a] + 0.5) * half[a];
  }
  return children;
}

Vec3 RigidTransform::rotate(const Vec3& p) const {
  return {r[0] * p[0] + r[1] * p[1] + r[2] * p[2], r[3] * p[0] + r[4] * p[1] + r[5] * p[2],
          r[6] * p[0] + r[7] * p[1] + r[8] * p[2]};
}

Vec3 RigidTransform::apply(const Vec3& p) const {
  Vec3 q = rotate(p);
  return {q[0] + t[0], q[1] + t[1], q[2] + t[2]};
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.r = {r[0], r[3], r[6], r[1], r[4], r[7], r[2], r[5], r[8]};
  const Vec3 rt = inv.rotate(t);
  inv.t = {-rt[0], -rt[1], -rt[2]};
  return inv;
}

void CameraModel::validate() const {
  if (!(fx > 0 && fy > 0)) throw GeometryError("camera: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw GeometryError("camera: image size must be positive");
  const auto& m = grid_to_camera.r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0;
      for (int k = 0; k < 3; ++k) dot += m[3 * i + k] * m[3 * j + k];
      if (std::abs(dot - (i == j ? 1.0 : 0.0)) > 1e-6) {
        throw GeometryError("camera: extrinsic rotation is not orthonormal");
      }
    }
  }
  const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
                     m[2] * (m[3] * m[7] - m[4] * m[6]);
  if (std::abs(det - 1.0) > 1e-6) throw GeometryError("camera: extrinsic rotation has det != 1");
}

Vec3 CameraModel::position_in_grid() const { return grid_to_camera.inverse().t; }

Projection project_point(const CameraModel& cam, const Vec3& p_grid) {
  const Vec3 pc = cam.grid_to_camera.apply(p_grid);
  Projection pr;
  pr.depth = pc[2];
  pr.out_of_view = !(pc[2] > 0.0);
  if (!pr.out_of_view) {
    pr.u = cam.cx + cam.fx * pc[0] / pc[2];
    pr.v = cam.cy + cam.fy * pc[1] / pc[2];
  } else {
    pr.u = std::numeric_limits<double>::quiet_NaN();
    pr.v = std::numeric_limits<double>::quiet_NaN();
  }
  return pr;
}

std::vector<Projection> project_points(const CameraModel& cam, std::span<const Vec3> points) {
  std::vector<Projection> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(project_point(cam, p));
  return out;
}

Vec3 unproject(const CameraModel& cam, double u, double v, double depth) {
  const Vec3 pc{(u - cam.cx) / cam.fx * depth, (v - cam.cy) / cam.fy * depth, depth};
  return cam.grid_to_camera.inverse().apply(pc);
}

namespace {

Box3D transform_hull(const Box3D& b, const RigidTransform& tf, Frame out_frame) {
  const Vec3 lo = b.min();
  const Vec3 hi = b.max();
  Vec3 mn{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 mx{-mn[0], -mn[1], -mn[2]};
  for (int c = 0; c < 8; ++c) {
    const Vec3 p{(c & 1) ? hi[0] : lo[0], (c & 2) ? hi[1] : lo[1], (c & 4) ? hi[2] : lo[2]};
    const Vec3 q = tf.apply(p);
    for (int a = 0; a < 3; ++a) {
      mn[a] = std::min(mn[a], q[a]);
      mx[a] = std::max(mx[a], q[a]);
    }
  }
  return Box3D::from_corners(mn, mx, out_frame);
}

}  // namespace

Box3D camera_to_grid(const Box3D& b, const CameraModel& cam) {
  if (b.frame != Frame::camera) throw GeometryError("camera_to_grid: box is not in camera frame");
  return transform_hull(b, cam.grid_to_camera.inverse(), Frame::grid);
}

Box3D grid_to_camera(const Box3D& b, const CameraModel& cam) {
  if (b.frame != Frame::grid) throw GeometryError("grid_to_camera: box is not in grid frame");
  return transform_hull(b, cam.grid_to_camera, Frame::camera);
}

VoxelGrid::VoxelGrid(GridShape s, double vs, Vec3 o)
    : shape(s), voxel_size(vs), origin(o), labels(static_cast<std::size_t>(s.cells()), kFree) {
  if (s.d <= 0 || s.w <= 0 || s.h <= 0) throw GeometryError("VoxelGrid: non-positive shape");
  if (!(vs > 0)) throw GeometryError("VoxelGrid: voxel size must be positive");
}

Cell VoxelGrid::cell_of(std::int64_t idx) const {
  const int z = static_cast<int>(idx % shape.h);
  idx /= shape.h;
  const int y = static_cast<int>(idx % shape.w);
  const int x = static_cast<int>(idx / shape.w);
  return {x, y, z};
}

Vec3 VoxelGrid::voxel_center(int x, int y, int z) const {
  return {origin[0] + (x + 0.5) * voxel_size, origin[1] + (y + 0.5) * voxel_size,
          origin[2] + (z + 0.5) * voxel_size};
}

Box3D VoxelGrid::voxel_box(int x, int y, int z) const {
  return {voxel_center(x, y, z), {voxel_size, voxel_size, voxel_size}, Frame::grid};
}

Box3D VoxelGrid::bounds() const {
  const Vec3 hi{origin[0] + shape.d * voxel_size, origin[1] + shape.w * voxel_size,
                origin[2] + shape.h * voxel_size};
  return Box3D::from_corners(origin, hi, Frame::grid);
}

void VoxelGrid::validate(int num_classes) const {
  if (static_cast<std::int64_t>(labels.size()) != shape.cells()) {
    throw GeometryError("VoxelGrid: label array does not match shape");
  }
  for (Label l : labels) {
    if (l != kIgnore && l > num_classes) throw GeometryError("VoxelGrid: label out of range");
  }
}

std::int64_t BinaryGrid::count() const {
  return std::count_if(cells.begin(), cells.end(), [](std::uint8_t c) { return c != 0; });
}

BinaryGrid occupancy(const VoxelGrid& grid, std::span<const Label> classes) {
  BinaryGrid out(grid.shape);
  for (std::size_t i = 0; i < grid.labels.size(); ++i) {
    const Label l = grid.labels[i];
    bool occ = l != kFree && l != kIgnore;
    if (occ && !classes.empty()) occ = std::find(classes.begin(), classes.end(), l) != classes.end();
    out.cells[i] = occ ? 1 : 0;
  }
  return out;
}

OccupancyPyramid build_occupancy_pyramid(const BinaryGrid& level0, int levels) {
  if (levels < 0) throw GeometryError("build_occupancy_pyramid: negative level count");
  const int f = 1 << levels;
  const GridShape s = level0.shape;
  if (s.d % f != 0 || s.w % f != 0 || s.h % f != 0) {
    throw GeometryError("build_occupancy_pyramid: grid shape not divisible by 2^levels");
  }
  OccupancyPyramid pyr;
  pyr.levels.push_back(level0);
  for (int l = 0; l < levels; ++l) {
    const BinaryGrid& fine = pyr.levels.back();
    BinaryGrid coarse({fine.shape.d / 2, fine.shape.w / 2, fine.shape.h / 2});
    for (int x = 0; x < fine.shape.d; ++x) {
      for (int y = 0; y < fine.shape.w; ++y) {
        for (int z = 0; z < fine.shape.h; ++z) {
          if (fine.at(x, y, z)) coarse.cells[coarse.index(x / 2, y / 2, z / 2)] = 1;
        }
      }
    }
    pyr.levels.push_back(std::move(coarse));
  }
  return pyr;
}

OccupancyPyramid build_occupancy_pyramid(const VoxelGrid& grid, int levels) {
  return build_occupancy_pyramid(occupancy(grid), levels);
}

LocalGrid resample_local_grid(const VoxelGrid& grid, const Box3D& b, int out_res,
                              std::span<const Label> target_classes) {
  if (out_res < 1) throw GeometryError("resample_local_grid: out_res must be >= 1");
  if (b.frame != Frame::grid) throw GeometryError("resample_local_grid: box must be in grid frame");
  LocalGrid out;
  out.res = out_res;
  out.cells.assign(static_cast<std::size_t>(out_res) * out_res * out_res, 0);

  const Vec3 lo = b.min();
  const Vec3 hi = b.max();
  const Box3D gb = grid.bounds();
  const Vec3 glo = gb.min();
  const Vec3 ghi = gb.max();
  for (int a = 0; a < 3; ++a) {
    if (!(hi[a] > glo[a] && lo[a] < ghi[a])) {
      out.outside = true;
      return out;
    }
  }

  auto is_target = [&](int x, int y, int z) -> double {
    if (!grid.contains(x, y, z)) return 0.0;
    const Label l = grid.at(x, y, z);
    return std::find(target_classes.begin(), target_classes.end(), l) != target_classes.end() ? 1.0
                                                                                                : 0.0;
  };

  // Clamp range, in voxel-center coordinates, of centers covered by the box.
  double cmin[3], cmax[3];
  for (int a = 0; a < 3; ++a) {
    const double lo_c = (lo[a] - grid.origin[a]) / grid.voxel_size - 0.5;
    const double hi_c = (hi[a] - grid.origin[a]) / grid.voxel_size - 0.5;
    const double first = std::ceil(lo_c);
    const double last = std::floor(hi_c);
    if (first <= last) {
      cmin[a] = first;
      cmax[a] = last;
    } else {
      cmin[a] = cmax[a] = std::floor(0.5 * (lo_c + hi_c) + 0.5);
    }
  }

  for (int i = 0; i < out_res; ++i) {
    for (int j = 0; j < out_res; ++j) {
      for (int k = 0; k < out_res; ++k) {
        const int idx3[3] = {i, j, k};
        double u[3];
        int base[3];
        double frac[3];
        for (int a = 0; a < 3; ++a) {
          const double p = lo[a] + (idx3[a] + 0.5) * b.size[a] / out_res;
          u[a] = std::clamp((p - grid.origin[a]) / grid.voxel_size - 0.5, cmin[a], cmax[a]);
          base[a] = static_cast<int>(std::floor(u[a]));
          frac[a] = u[a] - base[a];
        }
        double val = 0.0;
        for (int c = 0; c < 8; ++c) {
          const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
          const double w = (dx ? frac[0] : 1 - frac[0]) * (dy ? frac[1] : 1 - frac[1]) *
                           (dz ? frac[2] : 1 - frac[2]);
          if (w == 0.0) continue;
          val += w * is_target(base[0] + dx, base[1] + dy, base[2] + dz);
        }
        out.cells[(static_cast<std::size_t>(i) * out_res + j) * out_res + k] = val >= 0.5 ? 1 : 0;
      }
    }
  }
  return out;
}

}  // namespace mixocc
