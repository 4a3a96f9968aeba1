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


#include "training/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace mixocc {

namespace F = torch::nn::functional;

namespace {
std::atomic<std::int64_t> g_hungarian_calls{0};

Tensor corners2d(const Tensor& b) {
  auto c = b.narrow(-1, 0, 2), s = b.narrow(-1, 2, 2);
  return torch::cat({c - 0.5 * s, c + 0.5 * s}, -1);
}
}  // namespace

Tensor focal_elementwise(const Tensor& logits, const Tensor& targets, double alpha, double gamma) {
  auto p = torch::sigmoid(logits);
  auto ce = F::binary_cross_entropy_with_logits(logits, targets,
                                                F::BinaryCrossEntropyWithLogitsFuncOptions().reduction(torch::kNone));
  auto p_t = p * targets + (1 - p) * (1 - targets);
  auto loss = gamma == 0.0 ? ce : ce * torch::pow(1 - p_t, gamma);
  if (alpha >= 0) loss = (alpha * targets + (1 - alpha) * (1 - targets)) * loss;
  return loss;
}

Tensor loss_focal(const Tensor& logits, const Tensor& targets, double alpha, double gamma) {
  if (logits.numel() == 0) return logits.sum();
  return focal_elementwise(logits, targets, alpha, gamma).mean();
}

Tensor loss_dice(const Tensor& probs, const Tensor& targets, double eps) {
  auto p = probs.reshape(-1), t = targets.reshape(-1);
  return 1 - (2 * (p * t).sum() + eps) / (p.sum() + t.sum() + eps);
}

Tensor loss_bce(const Tensor& probs, const Tensor& targets) {
  if (probs.numel() == 0) return probs.sum();
  auto p = probs.clamp(1e-12, 1 - 1e-12);
  return -(targets * p.log() + (1 - targets) * (1 - p).log()).mean();
}

Tensor loss_bce_logits(const Tensor& logits, const Tensor& targets) {
  if (logits.numel() == 0) return logits.sum();
  return F::binary_cross_entropy_with_logits(logits, targets);
}

Tensor giou2d(const Tensor& a, const Tensor& b) {
  auto A = corners2d(a), B = corners2d(b);
  auto lo = torch::max(A.narrow(-1, 0, 2), B.narrow(-1, 0, 2));
  auto hi = torch::min(A.narrow(-1, 2, 2), B.narrow(-1, 2, 2));
  auto wh = (hi - lo).clamp_min(0);
  auto inter = wh.select(-1, 0) * wh.select(-1, 1);
  auto area_a = a.select(-1, 2) * a.select(-1, 3);
  auto area_b = b.select(-1, 2) * b.select(-1, 3);
  auto uni = area_a + area_b - inter;
  auto clo = torch::min(A.narrow(-1, 0, 2), B.narrow(-1, 0, 2));
  auto chi = torch::max(A.narrow(-1, 2, 2), B.narrow(-1, 2, 2));
  auto cwh = chi - clo;
  auto hull = cwh.select(-1, 0) * cwh.select(-1, 1);
  return inter / uni - (hull - uni) / hull;
}

Tensor giou2d_pairwise(const Tensor& a, const Tensor& b) {
  const auto N = a.size(0), M = b.size(0);
  return giou2d(a.unsqueeze(1).expand({N, M, 4}), b.unsqueeze(0).expand({N, M, 4}));
}

Tensor giou3d(const Tensor& a, const Tensor& b) {
  auto alo = a.narrow(-1, 0, 3) - 0.5 * a.narrow(-1, 3, 3), ahi = a.narrow(-1, 0, 3) + 0.5 * a.narrow(-1, 3, 3);
  auto blo = b.narrow(-1, 0, 3) - 0.5 * b.narrow(-1, 3, 3), bhi = b.narrow(-1, 0, 3) + 0.5 * b.narrow(-1, 3, 3);
  auto inter = (torch::min(ahi, bhi) - torch::max(alo, blo)).clamp_min(0).prod(-1);
  auto uni = a.narrow(-1, 3, 3).prod(-1) + b.narrow(-1, 3, 3).prod(-1) - inter;
  auto hull = (torch::max(ahi, bhi) - torch::min(alo, blo)).prod(-1);
  return inter / uni - (hull - uni) / hull;
}

DetTargets make_det_targets(const std::vector<ObjectLabel>& labels, const CameraModel& cam,
                            const CategorySplit& split, const torch::TensorOptions& opts) {
  std::vector<std::int64_t> cls;
  std::vector<double> b2, b3;
  for (const auto& l : labels) {
    const int ci = split.foreground_index(l.class_id);
    if (ci < 0) throw std::invalid_argument("make_det_targets: label is not a foreground class");
    cls.push_back(ci);
    b2.insert(b2.end(), {l.box2d.cx / cam.width, l.box2d.cy / cam.height, l.box2d.w / cam.width,
                         l.box2d.h / cam.height});
    const Box3D c = grid_to_camera(l.box3d, cam);
    b3.insert(b3.end(), {c.center[0], c.center[1], c.center[2], c.size[0], c.size[1], c.size[2]});
  }
  DetTargets t;
  const auto n = static_cast<std::int64_t>(cls.size());
  t.classes = torch::tensor(cls, torch::kInt64);
  t.boxes2d = torch::tensor(b2, torch::kFloat64).view({n, 4}).to(opts.dtype());
  t.boxes3d = torch::tensor(b3, torch::kFloat64).view({n, 6}).to(opts.dtype());
  return t;
}

std::int64_t hungarian_calls() { return g_hungarian_calls.load(); }
void reset_hungarian_calls() { g_hungarian_calls = 0; }

Match hungarian_match(const Tensor& logits, const Tensor& boxes2d, const DetTargets& t, const LossWeights& w) {
  ++g_hungarian_calls;
  Match m;
  const auto n = t.size();
  if (n == 0) return m;
  torch::NoGradGuard ng;
  auto p = torch::sigmoid(logits.to(torch::kFloat64)).index_select(1, t.classes);  // [k, n]
  const double a = w.focal_alpha, g = w.focal_gamma;
  auto pos = a * torch::pow(1 - p, g) * -(p + 1e-8).log();
  auto neg = (1 - a) * torch::pow(p, g) * -(1 - p + 1e-8).log();
  auto b = boxes2d.to(torch::kFloat64), tb = t.boxes2d.to(torch::kFloat64);
  auto l1 = torch::cdist(b, tb, 1.0);
  auto gi = giou2d_pairwise(b, tb);
  auto cost = (w.match_class * (pos - neg) + w.match_l1 * l1 + w.match_giou * (1 - gi)).t().contiguous();  // [n, k]
  CostMatrix c(static_cast<int>(n), static_cast<int>(cost.size(1)));
  std::copy(cost.data_ptr<double>(), cost.data_ptr<double>() + cost.numel(), c.data.begin());
  const auto as = hungarian(c);
  for (int g2 = 0; g2 < static_cast<int>(n); ++g2) {
    m.pred.push_back(as.col_of_row[g2]);
    m.gt.push_back(g2);
  }
  return m;
}

DetTerms detection_terms(const Tensor& logits, const Tensor& boxes2d, const Tensor& boxes3d,
                         const std::vector<DetTargets>& targets, const std::vector<Match>& matches,
                         const LossWeights& w, double box3d_scale) {
  const auto B = logits.size(0);
  std::int64_t n_gt = 0;
  for (const auto& t : targets) n_gt += t.size();
  const double norm = static_cast<double>(std::max<std::int64_t>(1, n_gt));
  auto cls_t = torch::zeros_like(logits);
  std::vector<Tensor> pb2, tb2, pb3, tb3;
  for (std::int64_t b = 0; b < B; ++b) {
    const auto& m = matches[b];
    if (m.pred.empty()) continue;
    auto pi = torch::tensor(m.pred, torch::kInt64), gi = torch::tensor(m.gt, torch::kInt64);
    auto tc = targets[b].classes.index_select(0, gi);
    cls_t[b].index_put_({pi, tc}, 1.0);
    pb2.push_back(boxes2d[b].index_select(0, pi));
    tb2.push_back(targets[b].boxes2d.index_select(0, gi).to(boxes2d.dtype()));
    if (boxes3d.defined()) {
      pb3.push_back(boxes3d[b].index_select(0, pi));
      tb3.push_back(targets[b].boxes3d.index_select(0, gi).to(boxes3d.dtype()));
    }
  }
  DetTerms d;
  d.cls = focal_elementwise(logits, cls_t, w.focal_alpha, w.focal_gamma).sum() / norm;
  auto zero = logits.sum() * 0;
  if (pb2.empty()) {
    d.box2d = d.giou2d = d.box3d = d.giou3d = zero;
    return d;
  }
  auto p2 = torch::cat(pb2), t2 = torch::cat(tb2);
  d.box2d = (p2 - t2).abs().sum() / norm;
  d.giou2d = (1 - giou2d(p2, t2)).sum() / norm;
  if (boxes3d.defined()) {
    auto p3 = torch::cat(pb3), t3 = torch::cat(tb3);
    auto pc = p3.narrow(1, 0, 3) / box3d_scale, tc = t3.narrow(1, 0, 3) / box3d_scale;
    auto ps = p3.narrow(1, 3, 3).log(), ts = t3.narrow(1, 3, 3).log();
    d.box3d = ((pc - tc).abs().sum() + (ps - ts).abs().sum()) / norm;
    d.giou3d = (1 - giou3d(p3, t3)).sum() / norm;
  } else {
    d.box3d = d.giou3d = zero;
  }
  return d;
}

void accumulate(LossTerms& into, const DetTerms& d) {
  auto add = [&](const char* k, const Tensor& v) {
    auto it = into.find(k);
    if (it == into.end()) into.emplace(k, v);
    else it->second = it->second + v;
  };
  add("cls", d.cls);
  add("box2d", d.box2d);
  add("giou2d", d.giou2d);
  add("box3d", d.box3d);
  add("giou3d", d.giou3d);
}

double weight_of(const std::string& term, const LossWeights& w) {
  if (term == "cls") return 1.0;
  if (term == "box2d") return w.box2d;
  if (term == "giou2d") return w.giou2d;
  if (term == "box3d") return w.box3d;
  if (term == "giou3d") return w.giou3d;
  if (term == "background") return w.background;
  if (term == "foreground") return w.foreground;
  if (term == "focal") return w.focal;
  if (term == "dice2") return w.dice2;
  throw std::invalid_argument("unknown loss term: " + term);
}

Tensor total_loss(const LossTerms& terms, const LossWeights& w) {
  Tensor total;
  for (const auto& [k, v] : terms) {
    auto t = weight_of(k, w) * v;
    total = total.defined() ? total + t : t;
  }
  if (!total.defined()) throw std::invalid_argument("total_loss: no terms");
  return total;
}

}  // namespace mixocc
