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

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "acceptance.hpp"
#include "detector/detector.hpp"
#include "labelgen/labelgen.hpp"
#include "occdecoder/occdecoder.hpp"
#include "oracles.hpp"
#include "semhead/semhead.hpp"
#include "training/bench.hpp"
#include "training/hungarian.hpp"

namespace acceptance {

using namespace mixocc;

namespace {

double giou3d_corners(const Box3D& a, const Box3D& b) {
  double inter = 1, hull = 1;
  for (int k = 0; k < 3; ++k) {
    const double alo = a.center[k] - a.size[k] / 2, ahi = a.center[k] + a.size[k] / 2;
    const double blo = b.center[k] - b.size[k] / 2, bhi = b.center[k] + b.size[k] / 2;
    inter *= std::max(0.0, std::min(ahi, bhi) - std::max(alo, blo));
    hull *= std::max(ahi, bhi) - std::min(alo, blo);
  }
  const double uni = a.volume() + b.volume() - inter;
  return inter / uni - (hull - uni) / hull;
}

void giou_properties(Tally& t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(-5, 5), s(0.05, 4);
  for (int i = 0; i < 2000; ++i) {
    const Box2D a{c(rng), c(rng), s(rng), s(rng)}, b{c(rng), c(rng), s(rng), s(rng)};
    const double ab = giou(a, b), ba = giou(b, a);
    t.check(std::abs(giou(a, a) - 1) < 1e-12, "2d giou(a, a) != 1");
    t.check(ab == ba, "2d giou not symmetric");
    t.check(ab > -1 && ab <= 1, "2d giou out of (-1, 1]");
    t.check(ab <= iou(a, b) + 1e-12, "2d giou above iou");
    t.check(std::abs(ab - oracle::giou2d(a, b)) < 1e-12, "2d giou differs from corner oracle");

    const Box3D p{{c(rng), c(rng), c(rng)}, {s(rng), s(rng), s(rng)}, Frame::camera};
    const Box3D q{{c(rng), c(rng), c(rng)}, {s(rng), s(rng), s(rng)}, Frame::camera};
    const double pq = giou(p, q);
    t.check(std::abs(giou(p, p) - 1) < 1e-12, "3d giou(a, a) != 1");
    t.check(pq == giou(q, p), "3d giou not symmetric");
    t.check(pq > -1 && pq <= 1, "3d giou out of (-1, 1]");
    t.check(std::abs(pq - giou3d_corners(p, q)) < 1e-12, "3d giou differs from corner oracle");
  }
  bool threw = false;
  try {
    giou(Box3D{{0, 0, 0}, {1, 1, 1}, Frame::camera}, Box3D{{0, 0, 0}, {1, 1, 1}, Frame::grid});
  } catch (const GeometryError&) {
    threw = true;
  }
  t.check(threw, "3d giou accepted mixed frames");
}

void tiling_properties(Tally& t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(-5, 5), s(0.1, 4), u(0, 1);
  for (int i = 0; i < 500; ++i) {
    const Box3D b{{c(rng), c(rng), c(rng)}, {s(rng), s(rng), s(rng)}, Frame::grid};
    const auto kids = subdivide_box(b);
    double vol = 0;
    for (int k = 0; k < 8; ++k) {
      vol += kids[k].volume();
      for (int a = 0; a < 3; ++a) {
        t.check(kids[k].min()[a] >= b.min()[a] - 1e-12 && kids[k].max()[a] <= b.max()[a] + 1e-12,
                "child leaves parent");
        const int half = a == 0 ? (k & 1) : a == 1 ? ((k >> 1) & 1) : (k >> 2);
        t.check(std::abs(kids[k].center[a] - (b.center[a] + (half ? 0.25 : -0.25) * b.size[a])) < 1e-12,
                "child ordering");
      }
      for (int m = k + 1; m < 8; ++m) {
        const AlignedBox<3> x = aligned(kids[k]), y = aligned(kids[m]);
        double inter = 1;
        for (int a = 0; a < 3; ++a) inter *= std::max(0.0, std::min(x.hi[a], y.hi[a]) - std::max(x.lo[a], y.lo[a]));
        t.check(inter < 1e-12 * b.volume(), "children overlap");
      }
    }
    t.check(std::abs(vol - b.volume()) < 1e-12 * std::max(1.0, b.volume()), "children volume != parent");
    // Random interior points fall in exactly one child.
    for (int p = 0; p < 20; ++p) {
      Vec3 x;
      for (int a = 0; a < 3; ++a) x[a] = b.min()[a] + u(rng) * b.size[a];
      int hits = 0;
      for (const auto& k : kids) {
        bool in = true;
        for (int a = 0; a < 3; ++a) in = in && x[a] > k.min()[a] && x[a] < k.max()[a];
        hits += in;
      }
      t.check(hits == 1, "interior point not covered exactly once");
    }
  }
}

void pyramid_properties(Tally& t, std::mt19937_64& rng) {
  const GridShape shapes[] = {{8, 8, 8}, {16, 16, 16}, {32, 32, 8}};
  for (const auto& sh : shapes) {
    const int levels = 3;
    for (int i = 0; i < 30; ++i) {
      BinaryGrid b(sh);
      const double p = 0.01 + 0.08 * (i % 6);
      for (auto& c : b.cells) c = std::uniform_real_distribution<double>(0, 1)(rng) < p;
      const auto pyr = build_occupancy_pyramid(b, levels);
      t.check(static_cast<int>(pyr.levels.size()) == levels + 1, "pyramid level count");
      t.check(pyr.levels[0].cells == b.cells, "pyramid level 0 differs from input");
      BinaryGrid ref = b;
      for (int l = 1; l <= levels; ++l) {
        ref = oracle::block_or(ref);
        t.check(pyr.levels[l].cells == ref.cells, "pyramid level differs from block OR");
      }
    }
  }
}

void clustering_properties(Tally& t, std::mt19937_64& rng) {
  for (int i = 0; i < 40; ++i) {
    VoxelGrid g({16, 16, 16}, 1.0);
    const double p = 0.01 + 0.03 * (i % 4);
    for (auto& l : g.labels) {
      const double r = std::uniform_real_distribution<double>(0, 1)(rng);
      l = r < p ? cls::car : r < 1.5 * p ? cls::person : kFree;
    }
    for (Label c : {cls::car, cls::person}) {
      for (double thr : {1.0, std::sqrt(2.0), std::sqrt(3.0), 2.0}) {
        const auto clusters = cluster_objects(g, c, thr);
        const auto ids = oracle::cluster_ids(g, c, thr);
        // Each cluster maps to its smallest member index, which is the oracle id.
        std::vector<std::int64_t> mine(g.labels.size(), -1);
        std::int64_t prev_first = -1;
        for (const auto& cl : clusters) {
          std::int64_t first = g.index(cl[0][0], cl[0][1], cl[0][2]);
          for (const Cell& v : cl) first = std::min(first, g.index(v[0], v[1], v[2]));
          t.check(first > prev_first, "clusters not ordered by first voxel");
          prev_first = first;
          for (const Cell& v : cl) mine[g.index(v[0], v[1], v[2])] = first;
        }
        t.check(mine == ids, "clusters differ from union-find oracle");
      }
    }
  }
}

void visibility_properties(Tally& t, std::mt19937_64& rng, int& scenes, int& agree) {
  for (int i = 0; i < 100; ++i) {
    auto [g, cam] = oracle::random_scene(rng, 16);
    const bool same = visibility_mask(cam, g).cells == oracle::raymarch_visibility(cam, g).cells;
    ++scenes;
    agree += same;
    t.check(same, "visibility differs from ray march");
  }
}

// Lexicographically first optimal prefix over column permutations.
std::vector<int> brute_lexmin(const CostMatrix& c, double& best) {
  std::vector<int> cols(c.cols), arg;
  std::iota(cols.begin(), cols.end(), 0);
  best = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (int r = 0; r < c.rows; ++r) s += c(r, cols[r]);
    if (s < best - 1e-9) {
      best = s;
      arg.assign(cols.begin(), cols.begin() + c.rows);
    }
    std::reverse(cols.begin() + c.rows, cols.end());
  } while (std::next_permutation(cols.begin(), cols.end()));
  return arg;
}

void hungarian_properties(Tally& t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 10);
  for (int i = 0; i < 1000; ++i) {
    const int n = 1 + static_cast<int>(i % 7);
    const int m = n + static_cast<int>(rng() % 3);
    CostMatrix c(n, m);
    const bool ties = i % 2 == 0;
    for (auto& x : c.data) x = ties ? std::floor(u(rng) / 3) : u(rng);
    double best = 0;
    const auto lex = brute_lexmin(c, best);
    const auto a = hungarian(c);
    t.check(std::abs(a.cost - best) <= 1e-9 * std::max(1.0, std::abs(best)), "hungarian cost not optimal");
    std::vector<int> used(m, 0);
    bool inj = static_cast<int>(a.col_of_row.size()) == n;
    for (int col : a.col_of_row) inj = inj && col >= 0 && col < m && used[col]++ == 0;
    t.check(inj, "hungarian assignment not injective");
    // Ties: the lexicographically smallest optimal assignment, every time.
    t.check(a.col_of_row == lex, "hungarian tie-break not lexicographic");
    t.check(hungarian(c).col_of_row == a.col_of_row, "hungarian not deterministic");
  }
}

void topk_properties(Tally& t, std::mt19937_64& rng) {
  for (int i = 0; i < 500; ++i) {
    const int n = 1 + static_cast<int>(rng() % 60);
    const int k = 1 + static_cast<int>(rng() % n);
    std::vector<double> v(n);
    for (auto& x : v) x = (i % 3 == 0) ? static_cast<double>(rng() % 4) : std::uniform_real_distribution<double>(-1, 1)(rng);
    std::vector<std::int64_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] > v[b]; });
    idx.resize(k);
    const auto got = select_top_k(v, k);
    t.check(got == idx, "select_top_k differs from sort oracle");
    double min_kept = 1e300, max_drop = -1e300;
    std::vector<char> kept(n, 0);
    for (auto j : got) kept[j] = 1;
    for (int j = 0; j < n; ++j) (kept[j] ? min_kept : max_drop) = kept[j] ? std::min(min_kept, v[j]) : std::max(max_drop, v[j]);
    t.check(min_kept >= max_drop, "top-k order statistic violated");
  }

  // Retention inside the occupancy decoder, on a random model and image.
  Config cfg;
  auto model = make_model(cfg, 5);
  model->eval();
  torch::NoGradGuard ng;
  const auto pyr =
      model->detector->encode_features(torch::randn({1, 3, cfg.data.image_height, cfg.data.image_width})).image(0);
  const auto cam = cfg.data.camera();
  auto out = model->occ->forward({}, pyr, cam);
  for (int l = 0; l < cfg.occdecoder.levels; ++l) {
    const auto& rec = out.levels[l];
    const auto n = rec.child_logits.size(0);
    t.check(rec.kept.size(0) == model->occ->k_at(l + 1), "retained count != K");
    std::vector<char> kept(n, 0);
    auto kk = rec.kept.contiguous();
    for (std::int64_t i = 0; i < kk.size(0); ++i) kept[kk[i].item<std::int64_t>()] = 1;
    auto s = rec.child_logits.to(torch::kFloat64).contiguous();
    const double* sp = s.data_ptr<double>();
    double min_kept = 1e300, max_drop = -1e300;
    for (std::int64_t i = 0; i < n; ++i)
      (kept[i] ? min_kept : max_drop) = kept[i] ? std::min(min_kept, sp[i]) : std::max(max_drop, sp[i]);
    t.check(min_kept >= max_drop, "decoder retention order statistic violated");
  }
  t.check(out.counts.bg_processed == model->occ->forward({}, pyr, cam).counts.bg_processed, "decode not repeatable");

  // Constant scores: children are retained by cell index.
  for (auto& p : model->occ->named_parameters())
    if (p.key().rfind("heads.1.", 0) == 0) p.value().zero_();
  auto q0 = model->occ->init_queries({}, torch::TensorOptions().dtype(torch::kFloat32));
  auto q1 = model->occ->upsample_step(q0, 50);
  const auto sh = model->occ->level_shape(1);
  for (int i = 0; i < 50; ++i) {
    auto c = q1.cells[i];
    t.check((c[0].item<std::int64_t>() * sh.w + c[1].item<std::int64_t>()) * sh.h + c[2].item<std::int64_t>() == i,
            "decoder tie-break not by cell index");
  }

  // Background classification ties go to the lower class row.
  const std::vector<Label> classes{9, 11, 13};
  auto logits = torch::tensor({1.0, 2.0, 0.5, 1.0, 2.0, 0.7, 0.0, 1.0, 0.7}).view({3, 3});
  t.check(classify_bg(logits, classes) == std::vector<Label>{9, 9, 11}, "classify_bg tie-break");
}

}  // namespace

Outcome c1_properties() {
  Stopwatch sw;
  std::mt19937_64 rng(2026);
  Tally t;
  int scenes = 0, agree = 0;
  giou_properties(t, rng);
  tiling_properties(t, rng);
  pyramid_properties(t, rng);
  clustering_properties(t, rng);
  visibility_properties(t, rng, scenes, agree);
  hungarian_properties(t, rng);
  topk_properties(t, rng);
  const double secs = sw.seconds();
  t.check(secs < 120, "runtime over 2 min");
  std::ostringstream os;
  os << "property suite: " << t.total() - t.failed() << "/" << t.total() << " checks, visibility " << agree << "/"
     << scenes << " scenes identical";
  if (!t.ok()) os << "; failed: " << t.failures();
  return {t.ok(), os.str()};
}

}  // namespace acceptance
