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


// Brute-force reference implementations shared by the unit tests and the
// acceptance property suite. Written for clarity, not speed.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "geometry/geometry.hpp"
#include "labelgen/labelgen.hpp"
#include "training/hungarian.hpp"

namespace oracle {

using namespace mixocc;

// All-pairs union-find; returns a cluster id per voxel index (-1 elsewhere),
// ids being the smallest member index of each cluster.
inline std::vector<std::int64_t> cluster_ids(const VoxelGrid& g, Label c, double thr) {
  std::vector<std::int64_t> idx;
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(g.labels.size()); ++i)
    if (g.labels[i] == c) idx.push_back(i);
  std::vector<std::size_t> parent(idx.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x];
    return x;
  };
  for (std::size_t a = 0; a < idx.size(); ++a) {
    const Cell ca = g.cell_of(idx[a]);
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const Cell cb = g.cell_of(idx[b]);
      double d2 = 0;
      for (int k = 0; k < 3; ++k) d2 += double(ca[k] - cb[k]) * (ca[k] - cb[k]);
      if (d2 <= thr * thr + 1e-9) {
        const std::size_t ra = find(a), rb = find(b);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }
  std::vector<std::int64_t> out(g.labels.size(), -1);
  for (std::size_t a = 0; a < idx.size(); ++a) out[idx[a]] = idx[find(a)];
  return out;
}

// Visibility by marching the center-to-camera segment in steps of 0.25 voxel.
// Each step visits the voxels touching the step's bounding box and keeps those
// the step crosses over a positive length (exact slab test), so corner and
// edge grazes do not occlude.
inline BinaryGrid raymarch_visibility(const CameraModel& cam, const VoxelGrid& g) {
  BinaryGrid occ = occupancy(g);
  BinaryGrid vis(g.shape);
  const Vec3 cw = cam.position_in_grid();
  Vec3 c;
  for (int a = 0; a < 3; ++a) c[a] = (cw[a] - g.origin[a]) / g.voxel_size;
  for (int x = 0; x < g.shape.d; ++x)
    for (int y = 0; y < g.shape.w; ++y)
      for (int z = 0; z < g.shape.h; ++z) {
        if (!project_point(cam, g.voxel_center(x, y, z)).inside_image(cam)) continue;
        const Vec3 s{x + 0.5, y + 0.5, z + 0.5};
        const Vec3 d{c[0] - s[0], c[1] - s[1], c[2] - s[2]};
        const double len = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        const int steps = std::max(1, static_cast<int>(std::ceil(len / 0.25)));
        bool blocked = false;
        for (int i = 0; i < steps && !blocked; ++i) {
          const double t0 = double(i) / steps, t1 = double(i + 1) / steps;
          int lo[3], hi[3];
          for (int a = 0; a < 3; ++a) {
            const double p0 = s[a] + t0 * d[a], p1 = s[a] + t1 * d[a];
            lo[a] = static_cast<int>(std::floor(std::min(p0, p1)));
            hi[a] = static_cast<int>(std::floor(std::max(p0, p1)));
          }
          for (int vx = lo[0]; vx <= hi[0] && !blocked; ++vx)
            for (int vy = lo[1]; vy <= hi[1] && !blocked; ++vy)
              for (int vz = lo[2]; vz <= hi[2] && !blocked; ++vz) {
                if (vx == x && vy == y && vz == z) continue;
                if (vx < 0 || vy < 0 || vz < 0 || vx >= g.shape.d || vy >= g.shape.w ||
                    vz >= g.shape.h)
                  continue;
                if (!occ.at(vx, vy, vz)) continue;
                // Slab test of the whole segment against the voxel.
                double te = 0, tx = 1;
                const int v[3] = {vx, vy, vz};
                for (int a = 0; a < 3; ++a) {
                  if (d[a] == 0) {
                    if (s[a] <= v[a] || s[a] >= v[a] + 1) te = 2;
                    continue;
                  }
                  double ta = (v[a] - s[a]) / d[a], tb = (v[a] + 1 - s[a]) / d[a];
                  if (ta > tb) std::swap(ta, tb);
                  te = std::max(te, ta);
                  tx = std::min(tx, tb);
                }
                if (tx - te > 1e-9) blocked = true;
              }
        }
        if (!blocked) vis.cells[vis.index(x, y, z)] = 1;
      }
  return vis;
}

inline BinaryGrid block_or(const BinaryGrid& fine) {
  BinaryGrid coarse({fine.shape.d / 2, fine.shape.w / 2, fine.shape.h / 2});
  for (int x = 0; x < coarse.shape.d; ++x)
    for (int y = 0; y < coarse.shape.w; ++y)
      for (int z = 0; z < coarse.shape.h; ++z) {
        int any = 0;
        for (int c = 0; c < 8; ++c) any |= fine.at(2 * x + (c & 1), 2 * y + ((c >> 1) & 1), 2 * z + (c >> 2));
        coarse.cells[coarse.index(x, y, z)] = static_cast<std::uint8_t>(any);
      }
  return coarse;
}

// Minimum over all injective row->column maps.
inline double brute_assignment(const CostMatrix& c) {
  std::vector<int> cols(c.cols);
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  // Permutations of all columns; the first `rows` entries form the map.
  do {
    double s = 0;
    for (int r = 0; r < c.rows; ++r) s += c(r, cols[r]);
    best = std::min(best, s);
    std::reverse(cols.begin() + c.rows, cols.end());
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

// Tent-kernel form of trilinear interpolation of the target indicator, with
// sample coordinates clamped to the voxel centers the box covers.
inline LocalGrid trilinear(const VoxelGrid& g, const Box3D& b, int res, Label target) {
  LocalGrid out;
  out.res = res;
  out.cells.assign(static_cast<std::size_t>(res) * res * res, 0);
  const Vec3 lo = b.min(), hi = b.max();
  double cmin[3], cmax[3];
  for (int a = 0; a < 3; ++a) {
    const double l = (lo[a] - g.origin[a]) / g.voxel_size - 0.5;
    const double h = (hi[a] - g.origin[a]) / g.voxel_size - 0.5;
    cmin[a] = std::ceil(l);
    cmax[a] = std::floor(h);
    if (cmin[a] > cmax[a]) cmin[a] = cmax[a] = std::floor(0.5 * (l + h) + 0.5);
  }
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j)
      for (int k = 0; k < res; ++k) {
        const int ijk[3] = {i, j, k};
        double u[3];
        for (int a = 0; a < 3; ++a)
          u[a] = std::clamp((lo[a] + (ijk[a] + 0.5) * b.size[a] / res - g.origin[a]) / g.voxel_size - 0.5,
                            cmin[a], cmax[a]);
        double v = 0;
        for (int x = 0; x < g.shape.d; ++x)
          for (int y = 0; y < g.shape.w; ++y)
            for (int z = 0; z < g.shape.h; ++z) {
              if (g.at(x, y, z) != target) continue;
              v += std::max(0.0, 1 - std::abs(u[0] - x)) * std::max(0.0, 1 - std::abs(u[1] - y)) *
                   std::max(0.0, 1 - std::abs(u[2] - z));
            }
        out.cells[(static_cast<std::size_t>(i) * res + j) * res + k] = v >= 0.5;
      }
  return out;
}

// Random 16^3 scene: scattered blocks of a few classes, camera in front.
inline std::pair<VoxelGrid, CameraModel> random_scene(std::mt19937_64& rng, int n = 16) {
  std::uniform_real_distribution<double> u(0, 1);
  VoxelGrid g({n, n, n}, 1.0);
  const Label classes[] = {cls::car, cls::person, cls::building, cls::vegetation};
  const int blocks = 4 + static_cast<int>(rng() % 12);
  for (int b = 0; b < blocks; ++b) {
    const Label l = classes[rng() % 4];
    const int sx = 1 + rng() % 4, sy = 1 + rng() % 4, sz = 1 + rng() % 4;
    const int x0 = rng() % n, y0 = rng() % n, z0 = rng() % n;
    for (int x = x0; x < std::min(n, x0 + sx); ++x)
      for (int y = y0; y < std::min(n, y0 + sy); ++y)
        for (int z = z0; z < std::min(n, z0 + sz); ++z) g.at(x, y, z) = l;
  }
  // Sprinkle single voxels too.
  for (int i = 0; i < 40; ++i) g.labels[rng() % g.labels.size()] = classes[rng() % 4];

  CameraModel cam;
  cam.fx = cam.fy = 24 + 16 * u(rng);
  cam.width = cam.height = 64;
  cam.cx = 32 + 4 * (u(rng) - 0.5);
  cam.cy = 32 + 4 * (u(rng) - 0.5);
  const double yaw = 0.3 * (u(rng) - 0.5), pitch = 0.3 * (u(rng) - 0.5);
  // grid (x fwd, y left, z up) -> camera (x right, y down, z fwd), then yaw, pitch.
  const double cy = std::cos(yaw), sy = std::sin(yaw), cp = std::cos(pitch), sp = std::sin(pitch);
  const std::array<double, 9> base{0, -1, 0, 0, 0, -1, 1, 0, 0};
  const std::array<double, 9> ry{cy, 0, sy, 0, 1, 0, -sy, 0, cy};
  const std::array<double, 9> rp{1, 0, 0, 0, cp, -sp, 0, sp, cp};
  auto mul = [](const std::array<double, 9>& a, const std::array<double, 9>& b) {
    std::array<double, 9> r{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) r[3 * i + j] += a[3 * i + k] * b[3 * k + j];
    return r;
  };
  cam.grid_to_camera.r = mul(rp, mul(ry, base));
  const Vec3 pos{-4 - 6 * u(rng), n * (0.3 + 0.4 * u(rng)), n * (0.3 + 0.4 * u(rng))};
  const Vec3 rpos = cam.grid_to_camera.rotate(pos);
  cam.grid_to_camera.t = {-rpos[0], -rpos[1], -rpos[2]};
  return {g, cam};
}

// GIoU of two (cx, cy, w, h) boxes from corner arithmetic.
inline double giou2d(const Box2D& a, const Box2D& b) {
  const double ax0 = a.cx - a.w / 2, ax1 = a.cx + a.w / 2, ay0 = a.cy - a.h / 2, ay1 = a.cy + a.h / 2;
  const double bx0 = b.cx - b.w / 2, bx1 = b.cx + b.w / 2, by0 = b.cy - b.h / 2, by1 = b.cy + b.h / 2;
  const double iw = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
  const double ih = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
  const double inter = iw * ih, uni = a.w * a.h + b.w * b.h - inter;
  const double hull = (std::max(ax1, bx1) - std::min(ax0, bx0)) * (std::max(ay1, by1) - std::min(ay0, by0));
  return inter / uni - (hull - uni) / hull;
}

}  // namespace oracle
