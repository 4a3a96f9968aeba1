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


#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "training/hungarian.hpp"
#include "training/metrics.hpp"

using namespace mixocc;

TEST_CASE("hungarian small cases") {
  CostMatrix c(2, 2);
  c(0, 0) = 1, c(0, 1) = 2, c(1, 0) = 2, c(1, 1) = 1;
  auto a = hungarian(c);
  CHECK(a.col_of_row == std::vector<int>{0, 1});
  CHECK(a.cost == 2);

  CostMatrix id(4, 4, 1.0);
  for (int i = 0; i < 4; ++i) id(i, i) = 0;
  CHECK(hungarian(id).col_of_row == std::vector<int>{0, 1, 2, 3});

  CHECK(hungarian(CostMatrix(0, 3)).col_of_row.empty());
  CHECK_THROWS_AS(hungarian(CostMatrix(3, 2)), std::invalid_argument);
  CostMatrix bad(1, 1);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(hungarian(bad), std::invalid_argument);
}

TEST_CASE("hungarian ties break lexicographically") {
  CostMatrix flat(3, 5, 1.0);
  CHECK(hungarian(flat).col_of_row == std::vector<int>{0, 1, 2});
  CostMatrix c(2, 3, 0.0);
  c(0, 0) = 5;  // forces row 0 away from column 0
  CHECK(hungarian(c).col_of_row == std::vector<int>{1, 0});
}

TEST_CASE("hungarian matches permutation brute force") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(0, 10);
  for (int t = 0; t < 300; ++t) {
    const int n = 1 + static_cast<int>(rng() % 6);
    const int m = n + static_cast<int>(rng() % 3);
    CostMatrix c(n, m);
    // Integer costs produce plenty of co-optimal ties.
    for (auto& x : c.data) x = (t % 2) ? u(rng) : std::floor(u(rng) / 3);
    const Assignment a = hungarian(c);
    CHECK(a.cost == doctest::Approx(oracle::brute_assignment(c)).epsilon(1e-12));
    std::vector<int> used(m, 0);
    for (int col : a.col_of_row) CHECK(used[col]++ == 0);
  }
}

TEST_CASE("miou") {
  VoxelGrid gt({2, 2, 2}, 1.0);
  gt.labels = {0, 1, 1, 2, 2, 0, 255, 9};
  auto same = metric_miou(gt.labels, gt, 20);
  CHECK(same.miou == 1.0);
  CHECK(same.count == 3);

  VoxelGrid free_gt({2, 2, 2}, 1.0);
  auto vacuous = metric_miou(free_gt.labels, free_gt, 20);
  CHECK(std::isnan(vacuous.miou));
  CHECK(vacuous.count == 0);

  std::vector<Label> pred = {1, 1, 2, 2, 0, 0, 3, 9};
  auto r = metric_miou(pred, gt, 20);
  // class 1: inter 1 (idx1), union {0,1,2} = 3; class 2: inter 1 (idx3), union {2,3,4} = 3;
  // class 9: 1/1; class 3 only appears on an ignored voxel.
  CHECK(r.iou[1] == doctest::Approx(1.0 / 3));
  CHECK(r.iou[2] == doctest::Approx(1.0 / 3));
  CHECK(r.iou[9] == 1.0);
  CHECK(std::isnan(r.iou[3]));
  CHECK(r.count == 3);
  CHECK(r.miou == doctest::Approx((1.0 / 3 + 1.0 / 3 + 1) / 3));
}

TEST_CASE("miou matches set-count oracle") {
  std::mt19937_64 rng(53);
  for (int t = 0; t < 100; ++t) {
    VoxelGrid gt({4, 4, 4}, 1.0);
    std::vector<Label> pred(gt.labels.size());
    for (auto& l : gt.labels) l = static_cast<Label>(rng() % 5 == 0 ? kIgnore : rng() % 6);
    for (auto& l : pred) l = static_cast<Label>(rng() % 6);
    const auto r = metric_miou(pred, gt, 6);
    double sum = 0;
    int n = 0;
    for (int c = 1; c < 6; ++c) {
      int inter = 0, uni = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        if (gt.labels[i] == kIgnore) continue;
        const bool p = pred[i] == c, g = gt.labels[i] == c;
        inter += p && g;
        uni += p || g;
      }
      if (uni == 0) {
        CHECK(std::isnan(r.iou[c]));
        continue;
      }
      CHECK(r.iou[c] == doctest::Approx(double(inter) / uni));
      sum += double(inter) / uni;
      ++n;
    }
    CHECK(r.count == n);
    if (n) CHECK(r.miou == doctest::Approx(sum / n));
  }
}

TEST_CASE("majority baseline") {
  VoxelGrid a({2, 2, 2}, 1.0), b({2, 2, 2}, 1.0);
  a.labels = {9, 9, 13, 0, 0, 0, 255, 1};
  b.labels = {13, 13, 13, 0, 0, 0, 0, 0};
  const VoxelGrid both[] = {a, b};
  CHECK(majority_class(both) == 13);
  const auto p = majority_prediction(a, 13);
  CHECK(p == std::vector<Label>{13, 13, 13, 0, 0, 0, 0, 13});
}

TEST_CASE("map") {
  const double thr[] = {0.5};
  std::vector<ScoredBox> gts = {{0, 1, 1, {10, 10, 4, 4}}, {0, 1, 1, {30, 30, 4, 4}},
                                {1, 2, 1, {20, 20, 6, 6}}};
  CHECK(metric_map(gts, gts, 3, thr).map == doctest::Approx(1.0));
  CHECK(metric_map({}, gts, 3, thr).map == 0.0);

  // Hand-executed PR curve for class 1 (2 GT): detections by confidence
  // 0.9 TP, 0.8 FP, 0.7 TP -> precision 1, 1/2, 2/3 at recall 1/2, 1/2, 1.
  // Envelope: 1, 2/3, 2/3 -> AP = 0.5 * 1 + 0.5 * 2/3 = 5/6.
  std::vector<ScoredBox> dets = {{0, 1, 0.9, {10, 10, 4, 4}},
                                 {0, 1, 0.8, {50, 50, 4, 4}},
                                 {0, 1, 0.7, {30, 30, 4, 4}}};
  const std::vector<ScoredBox> g1(gts.begin(), gts.begin() + 2);
  const auto r = metric_map(dets, g1, 3, thr);
  CHECK(r.ap_per_class[1] == doctest::Approx(5.0 / 6));
  CHECK(r.map == doctest::Approx(5.0 / 6));
  CHECK(std::isnan(r.ap_per_class[2]));

  // Duplicate detection of one GT counts as a false positive.
  std::vector<ScoredBox> dup = {{1, 2, 0.9, {20, 20, 6, 6}}, {1, 2, 0.8, {20, 20, 6, 6}}};
  const std::vector<ScoredBox> g2(gts.begin() + 2, gts.end());
  CHECK(metric_map(dup, g2, 3, thr).map == doctest::Approx(1.0));
  // Detection on another image does not match.
  std::vector<ScoredBox> other = {{3, 2, 0.9, {20, 20, 6, 6}}};
  CHECK(metric_map(other, g2, 3, thr).map == 0.0);
}

TEST_CASE("binary iou and dice") {
  const std::vector<std::uint8_t> a = {1, 1, 0, 0}, b = {1, 0, 1, 0}, z = {0, 0, 0, 0};
  CHECK(binary_iou(a, b) == doctest::Approx(1.0 / 3));
  CHECK(binary_dice(a, b) == doctest::Approx(0.5));
  CHECK(binary_iou(z, z) == 1.0);
}
