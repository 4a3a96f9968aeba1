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

#include "torch_doctest.hpp"
#include "oracles.hpp"
#include "training/losses.hpp"

using namespace mixocc;

namespace {

const auto f64 = torch::TensorOptions().dtype(torch::kFloat64);

DetTargets two_targets() {
  DetTargets t;
  t.classes = torch::tensor({0, 2}, torch::kInt64);
  t.boxes2d = torch::tensor({0.3, 0.4, 0.2, 0.3, 0.7, 0.6, 0.1, 0.2}, f64).view({2, 4});
  t.boxes3d = torch::tensor({-1.0, 0.5, 8.0, 4.0, 1.5, 1.6, 2.0, 0.6, 12.0, 0.6, 1.7, 0.6}, f64).view({2, 6});
  return t;
}

}  // namespace

TEST_CASE("focal loss") {
  // Confident and right: vanishing loss.
  auto big = torch::full({4}, 30.0, f64);
  CHECK(loss_focal(big, torch::ones({4}, f64), 0.25, 2).item<double>() < 1e-12);
  CHECK(loss_focal(-big, torch::zeros({4}, f64), 0.25, 2).item<double>() < 1e-12);

  // gamma = 0 with the class weighting off is plain binary cross-entropy.
  torch::manual_seed(1);
  auto x = torch::randn({200}, f64) * 3;
  auto t = (torch::rand({200}, f64) < 0.4).to(torch::kFloat64);
  auto p = torch::sigmoid(x);
  auto ce = -(t * p.log() + (1 - t) * (1 - p).log()).mean();
  CHECK(loss_focal(x, t, -1, 0).item<double>() == doctest::Approx(ce.item<double>()).epsilon(1e-9));
  // alpha weights positives by alpha and negatives by 1 - alpha.
  auto weighted = -(0.25 * t * p.log() + 0.75 * (1 - t) * (1 - p).log()).mean();
  CHECK(loss_focal(x, t, 0.25, 0).item<double>() == doctest::Approx(weighted.item<double>()).epsilon(1e-9));
  // Hand value: p = 0.5, positive, gamma 2 -> 0.25 * 0.25 * ln 2.
  CHECK(loss_focal(torch::zeros({1}, f64), torch::ones({1}, f64), 0.25, 2).item<double>() ==
        doctest::Approx(0.0625 * std::log(2.0)));
  CHECK(loss_focal(x, t, 0.25, 2).item<double>() >= 0);
  // Stable for extreme logits.
  CHECK(std::isfinite(loss_focal(torch::tensor({-800.0, 800.0}, f64), torch::tensor({1.0, 0.0}, f64), 0.25, 2)
                          .item<double>()));
}

TEST_CASE("dice loss") {
  auto m = torch::zeros({1000}, f64);
  m.narrow(0, 0, 150).fill_(1);
  CHECK(loss_dice(m, m).item<double>() < 1e-3);
  CHECK(loss_dice(m, m).item<double>() >= 0);
  auto other = torch::zeros({1000}, f64);
  other.narrow(0, 500, 150).fill_(1);
  CHECK(loss_dice(m, other).item<double>() == doctest::Approx(1 - 1.0 / 301.0));
  torch::manual_seed(2);
  for (int i = 0; i < 20; ++i) {
    auto pr = torch::rand({50}, f64), tg = (torch::rand({50}, f64) < 0.3).to(torch::kFloat64);
    const double v = loss_dice(pr, tg).item<double>();
    CHECK(v >= 0);
    CHECK(v <= 1);
  }
}

TEST_CASE("binary cross-entropy") {
  auto t = torch::tensor({1.0, 0.0, 1.0, 0.0}, f64);
  CHECK(loss_bce(t, t).item<double>() < 1e-6);
  CHECK(loss_bce(torch::full({4}, 0.5, f64), t).item<double>() == doctest::Approx(std::log(2.0)));
  torch::manual_seed(3);
  auto x = torch::randn({100}, f64) * 4;
  auto tt = (torch::rand({100}, f64) < 0.5).to(torch::kFloat64);
  CHECK(loss_bce_logits(x, tt).item<double>() ==
        doctest::Approx(loss_bce(torch::sigmoid(x), tt).item<double>()).epsilon(1e-6));
  CHECK(std::isfinite(loss_bce_logits(torch::tensor({1e4, -1e4}, f64), torch::tensor({0.0, 1.0}, f64)).item<double>()));
}

TEST_CASE("tensor GIoU matches the reference") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> c(0.1, 0.9), s(0.01, 0.5);
  std::vector<double> av, bv;
  std::vector<Box2D> ab, bb;
  for (int i = 0; i < 100; ++i) {
    Box2D a{c(rng), c(rng), s(rng), s(rng)}, b{c(rng), c(rng), s(rng), s(rng)};
    if (i % 10 == 0) b = a;
    ab.push_back(a), bb.push_back(b);
    av.insert(av.end(), {a.cx, a.cy, a.w, a.h});
    bv.insert(bv.end(), {b.cx, b.cy, b.w, b.h});
  }
  auto at = torch::tensor(av, f64).view({100, 4}), bt = torch::tensor(bv, f64).view({100, 4});
  auto g = giou2d(at, bt);
  auto pw = giou2d_pairwise(at, bt);
  for (int i = 0; i < 100; ++i) {
    CHECK(g[i].item<double>() == doctest::Approx(oracle::giou2d(ab[i], bb[i])).epsilon(1e-12));
    CHECK(pw[i][(i * 7) % 100].item<double>() ==
          doctest::Approx(oracle::giou2d(ab[i], bb[(i * 7) % 100])).epsilon(1e-12));
  }

  std::vector<double> a3, b3;
  std::vector<Box3D> x3, y3;
  std::uniform_real_distribution<double> p(-3, 3), q(0.2, 3);
  for (int i = 0; i < 100; ++i) {
    Box3D a{{p(rng), p(rng), p(rng)}, {q(rng), q(rng), q(rng)}, Frame::camera};
    Box3D b{{p(rng), p(rng), p(rng)}, {q(rng), q(rng), q(rng)}, Frame::camera};
    x3.push_back(a), y3.push_back(b);
    a3.insert(a3.end(), {a.center[0], a.center[1], a.center[2], a.size[0], a.size[1], a.size[2]});
    b3.insert(b3.end(), {b.center[0], b.center[1], b.center[2], b.size[0], b.size[1], b.size[2]});
  }
  auto g3 = giou3d(torch::tensor(a3, f64).view({100, 6}), torch::tensor(b3, f64).view({100, 6}));
  for (int i = 0; i < 100; ++i) CHECK(g3[i].item<double>() == doctest::Approx(giou(x3[i], y3[i])).epsilon(1e-12));
}

TEST_CASE("detection terms") {
  const LossWeights w;
  const auto t = two_targets();
  // Three queries; query 2 predicts target 0 exactly, query 0 target 1.
  auto boxes2d = torch::zeros({1, 3, 4}, f64);
  boxes2d[0][2] = t.boxes2d[0];
  boxes2d[0][0] = t.boxes2d[1];
  boxes2d[0][1] = torch::tensor({0.5, 0.5, 0.1, 0.1}, f64);
  auto boxes3d = torch::ones({1, 3, 6}, f64);
  boxes3d[0][2] = t.boxes3d[0];
  boxes3d[0][0] = t.boxes3d[1];
  auto logits = torch::full({1, 3, 4}, -20.0, f64);
  logits[0][2][0] = 20;
  logits[0][0][2] = 20;
  Match m{{2, 0}, {0, 1}};
  auto d = detection_terms(logits, boxes2d, boxes3d, {t}, {m}, w, 8.0);
  CHECK(std::abs(d.box2d.item<double>()) < 1e-12);
  CHECK(std::abs(d.giou2d.item<double>()) < 1e-12);
  CHECK(std::abs(d.box3d.item<double>()) < 1e-12);
  CHECK(std::abs(d.giou3d.item<double>()) < 1e-12);
  CHECK(d.cls.item<double>() < 1e-9);

  // Matching finds the same pairs.
  CHECK(hungarian_match(logits.squeeze(0), boxes2d.squeeze(0), t, w).pred == std::vector<std::int64_t>{2, 0});

  // Without objects only the no-object classification term is left.
  DetTargets none{torch::zeros({0}, torch::kInt64), torch::zeros({0, 4}, f64), torch::zeros({0, 6}, f64)};
  auto e = detection_terms(logits, boxes2d, boxes3d, {none}, {Match{}}, w, 8.0);
  CHECK(e.cls.item<double>() > 0);
  CHECK(std::isfinite(e.cls.item<double>()));
  CHECK(e.box2d.item<double>() == 0);
  CHECK(e.giou3d.item<double>() == 0);
  // Normalized by the number of targets: cls is the focal sum.
  auto cls_t = torch::zeros_like(logits);
  CHECK(e.cls.item<double>() ==
        doctest::Approx(focal_elementwise(logits, cls_t, w.focal_alpha, w.focal_gamma).sum().item<double>()));
}

TEST_CASE("total loss: linear in every weight, near zero at a constructed optimum") {
  LossWeights w;
  torch::manual_seed(6);
  LossTerms terms;
  for (const char* k : {"cls", "box2d", "giou2d", "box3d", "giou3d", "background", "foreground", "focal", "dice2"})
    terms[k] = torch::rand({}, f64) + 0.1;
  const double base = total_loss(terms, w).item<double>();
  double expect = 0;
  for (const auto& [k, v] : terms) expect += weight_of(k, w) * v.item<double>();
  CHECK(base == doctest::Approx(expect).epsilon(1e-14));
  for (const char* k : {"box2d", "giou2d", "box3d", "giou3d", "background", "foreground", "focal", "dice2"}) {
    LossWeights w2 = w;
    double* fields[] = {&w2.box2d, &w2.giou2d, &w2.box3d, &w2.giou3d, &w2.background, &w2.foreground, &w2.focal, &w2.dice2};
    const char* names[] = {"box2d", "giou2d", "box3d", "giou3d", "background", "foreground", "focal", "dice2"};
    for (int i = 0; i < 8; ++i)
      if (std::string(names[i]) == k) *fields[i] *= 2;
    const double delta = total_loss(terms, w2).item<double>() - base;
    CHECK(delta == doctest::Approx(weight_of(k, w) * terms[k].item<double>()).epsilon(1e-12));
  }
  CHECK_THROWS_AS(weight_of("nope", w), std::invalid_argument);

  // Every component at its optimum.
  const auto t = two_targets();
  auto boxes2d = t.boxes2d.unsqueeze(0).clone();
  auto boxes3d = t.boxes3d.unsqueeze(0).clone();
  auto logits = torch::full({1, 2, 4}, -20.0, f64);
  logits[0][0][0] = 20;
  logits[0][1][2] = 20;
  LossTerms opt;
  accumulate(opt, detection_terms(logits, boxes2d, boxes3d, {t}, {Match{{0, 1}, {0, 1}}}, w, 8.0));
  auto occ = (torch::rand({500}, f64) < 0.3).to(torch::kFloat64);
  opt["background"] = loss_bce_logits((occ * 2 - 1) * 20, occ);
  opt["foreground"] = loss_dice(occ, occ);
  auto masks = (torch::rand({9, 200}, f64) < 0.2).to(torch::kFloat64);
  opt["focal"] = loss_focal((masks * 2 - 1) * 20, masks, w.focal_alpha, w.focal_gamma);
  opt["dice2"] = loss_dice(masks, masks);
  const double total = total_loss(opt, w).item<double>();
  CHECK(total >= 0);
  CHECK(total < 0.01);
}
