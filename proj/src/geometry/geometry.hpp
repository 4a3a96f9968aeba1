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
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixocc {

using Vec3 = std::array<double, 3>;
using Cell = std::array<int, 3>;
using Label = std::uint16_t;

inline constexpr Label kFree = 0;
inline constexpr Label kIgnore = 255;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Frame : std::uint8_t { camera = 0, grid = 1 };

const char* frame_name(Frame f);

// Center-size 2D box in pixels (or normalized image units).
struct Box2D {
  double cx = 0, cy = 0, w = 0, h = 0;

  double x0() const { return cx - 0.5 * w; }
  double y0() const { return cy - 0.5 * h; }
  double x1() const { return cx + 0.5 * w; }
  double y1() const { return cy + 0.5 * h; }
  static Box2D from_corners(double x0, double y0, double x1, double y1);
};

struct Box3D {
  Vec3 center{};
  Vec3 size{};
  Frame frame = Frame::grid;

  Vec3 min() const;
  Vec3 max() const;
  double volume() const { return size[0] * size[1] * size[2]; }
  static Box3D from_corners(const Vec3& lo, const Vec3& hi, Frame frame);
};

/// Axis-aligned box in N dimensions, stored as closed interval per axis.
template <std::size_t N>
struct AlignedBox {
  std::array<double, N> lo{};
  std::array<double, N> hi{};

  double volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < N; ++i) v *= hi[i] - lo[i];
    return v;
  }
};

AlignedBox<2> aligned(const Box2D& b);
AlignedBox<3> aligned(const Box3D& b);

/// Generalized IoU of two axis-aligned boxes: IoU - (C - U) / C where C is
/// the volume of the smallest enclosing box. Range (-1, 1].
template <std::size_t N>
double giou(const AlignedBox<N>& a, const AlignedBox<N>& b) {
  double inter = 1.0;
  double hull = 1.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double lo = a.lo[i] > b.lo[i] ? a.lo[i] : b.lo[i];
    const double hi = a.hi[i] < b.hi[i] ? a.hi[i] : b.hi[i];
    inter *= hi > lo ? hi - lo : 0.0;
    const double clo = a.lo[i] < b.lo[i] ? a.lo[i] : b.lo[i];
    const double chi = a.hi[i] > b.hi[i] ? a.hi[i] : b.hi[i];
    hull *= chi - clo;
  }
  const double uni = a.volume() + b.volume() - inter;
  return inter / uni - (hull - uni) / hull;
}

template <std::size_t N>
double iou(const AlignedBox<N>& a, const AlignedBox<N>& b) {
  double inter = 1.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double lo = a.lo[i] > b.lo[i] ? a.lo[i] : b.lo[i];
    const double hi = a.hi[i] < b.hi[i] ? a.hi[i] : b.hi[i];
    inter *= hi > lo ? hi - lo : 0.0;
  }
  return inter / (a.volume() + b.volume() - inter);
}

double giou(const Box2D& a, const Box2D& b);
/// Throws GeometryError when the boxes live in different frames.
double giou(const Box3D& a, const Box3D& b);
double iou(const Box2D& a, const Box2D& b);

Box3D enlarge_box(const Box3D& b, double factor);

/// Splits a box into its 2x2x2 children. Child c has z-half (c >> 2),
/// y-half ((c >> 1) & 1) and x-half (c & 1).
std::array<Box3D, 8> subdivide_box(const Box3D& b);

// Rigid transform p' = R p + t, R row-major.
struct RigidTransform {
  std::array<double, 9> r{1, 0, 0, 0, 1, 0, 0, 0, 1};
  Vec3 t{};

  Vec3 apply(const Vec3& p) const;
  Vec3 rotate(const Vec3& p) const;
  RigidTransform inverse() const;
  static RigidTransform identity() { return {}; }
};

struct CameraModel {
  double fx = 1, fy = 1, cx = 0, cy = 0;
  RigidTransform grid_to_camera;
  int width = 1, height = 1;

  /// Throws GeometryError unless intrinsics are positive and the rotation is
  /// orthonormal with determinant one.
  void validate() const;
  /// Camera center expressed in the grid frame.
  Vec3 position_in_grid() const;
};

struct Projection {
  double u = 0, v = 0, depth = 0;
  bool out_of_view = false;  // depth <= 0

  bool inside_image(const CameraModel& cam) const {
    return !out_of_view && u >= 0 && v >= 0 && u < cam.width && v < cam.height;
  }
};

Projection project_point(const CameraModel& cam, const Vec3& p_grid);
std::vector<Projection> project_points(const CameraModel& cam, std::span<const Vec3> points);
/// Inverse of project_point for a known camera-frame depth.
Vec3 unproject(const CameraModel& cam, double u, double v, double depth);

/// Axis-aligned hull of the rigidly transformed corners of a camera-frame box.
Box3D camera_to_grid(const Box3D& b, const CameraModel& cam);
Box3D grid_to_camera(const Box3D& b, const CameraModel& cam);

struct GridShape {
  int d = 0, w = 0, h = 0;

  std::int64_t cells() const { return std::int64_t{d} * w * h; }
  bool operator==(const GridShape&) const = default;
};

/// Dense labelled voxel grid. Cell (x, y, z) covers
/// [origin + (x, y, z) * voxel_size, origin + (x + 1, y + 1, z + 1) * voxel_size].
struct VoxelGrid {
  GridShape shape;
  double voxel_size = 1.0;
  Vec3 origin{};
  std::vector<Label> labels;

  VoxelGrid() = default;
  VoxelGrid(GridShape s, double vs, Vec3 o = {});

  std::int64_t index(int x, int y, int z) const {
    return (std::int64_t{x} * shape.w + y) * shape.h + z;
  }
  bool contains(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < shape.d && y < shape.w && z < shape.h;
  }
  Label at(int x, int y, int z) const { return labels[index(x, y, z)]; }
  Label& at(int x, int y, int z) { return labels[index(x, y, z)]; }
  Cell cell_of(std::int64_t idx) const;
  Vec3 voxel_center(int x, int y, int z) const;
  Box3D voxel_box(int x, int y, int z) const;
  Box3D bounds() const;
  void validate(int num_classes) const;
};

struct BinaryGrid {
  GridShape shape;
  std::vector<std::uint8_t> cells;

  BinaryGrid() = default;
  explicit BinaryGrid(GridShape s) : shape(s), cells(static_cast<std::size_t>(s.cells()), 0) {}
  std::int64_t index(int x, int y, int z) const {
    return (std::int64_t{x} * shape.w + y) * shape.h + z;
  }
  std::uint8_t at(int x, int y, int z) const { return cells[index(x, y, z)]; }
  std::int64_t count() const;
};

/// Voxels whose label is neither free nor ignore; when `classes` is
/// non-empty only those labels count.
BinaryGrid occupancy(const VoxelGrid& grid, std::span<const Label> classes = {});

struct OccupancyPyramid {
  // levels[0] is full resolution, levels[l] has shape (D, W, H) / 2^l.
  std::vector<BinaryGrid> levels;
};

OccupancyPyramid build_occupancy_pyramid(const BinaryGrid& level0, int levels);
OccupancyPyramid build_occupancy_pyramid(const VoxelGrid& grid, int levels);

struct LocalGrid {
  int res = 0;
  std::vector<std::uint8_t> cells;  // index (i * res + j) * res + k, i along x
  bool outside = false;             // box misses the grid entirely
};

/// Trilinear resampling of the target-class indicator inside `b` onto a
/// res^3 lattice of cell centers, thresholded at 0.5. Sample coordinates are
/// clamped to the voxel centers covered by the box.
LocalGrid resample_local_grid(const VoxelGrid& grid, const Box3D& b, int out_res,
                              std::span<const Label> target_classes);

}  // namespace mixocc
