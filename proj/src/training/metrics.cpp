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

#include "training/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mixocc {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

MiouAccumulator::MiouAccumulator(int num_classes, std::vector<Label> ignore)
    : num_classes_(num_classes), ignore_(std::move(ignore)), inter_(num_classes, 0),
      uni_(num_classes, 0) {}

void MiouAccumulator::add(std::span<const Label> pred, std::span<const Label> gt) {
  if (pred.size() != gt.size()) throw std::invalid_argument("miou: shape mismatch");
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const Label g = gt[i];
    if (std::find(ignore_.begin(), ignore_.end(), g) != ignore_.end()) continue;
    const Label p = pred[i];
    if (p == g) {
      if (g != kFree && g < num_classes_) {
        ++inter_[g];
        ++uni_[g];
      }
      continue;
    }
    if (g != kFree && g < num_classes_) ++uni_[g];
    if (p != kFree && p < num_classes_) ++uni_[p];
  }
}

MiouResult MiouAccumulator::result() const {
  MiouResult r;
  r.iou.assign(num_classes_, kNaN);
  double sum = 0;
  for (int c = 1; c < num_classes_; ++c) {
    if (uni_[c] == 0) continue;
    r.iou[c] = static_cast<double>(inter_[c]) / static_cast<double>(uni_[c]);
    sum += r.iou[c];
    ++r.count;
  }
  r.miou = r.count ? sum / r.count : kNaN;
  return r;
}

MiouResult metric_miou(std::span<const Label> pred, const VoxelGrid& gt, int num_classes,
                       std::vector<Label> ignore) {
  MiouAccumulator acc(num_classes, std::move(ignore));
  acc.add(pred, gt.labels);
  return acc.result();
}

double binary_iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("binary_iou: size mismatch");
  std::int64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]);
    uni += (a[i] || b[i]);
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

double binary_dice(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("binary_dice: size mismatch");
  std::int64_t inter = 0, sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]);
    sa += a[i] != 0;
    sb += b[i] != 0;
  }
  return sa + sb ? 2.0 * static_cast<double>(inter) / static_cast<double>(sa + sb) : 1.0;
}

Label majority_class(std::span<const VoxelGrid> gts) {
  std::vector<std::int64_t> counts(kIgnore + 1, 0);
  for (const auto& g : gts) {
    for (Label l : g.labels) {
      if (l != kFree && l != kIgnore && l < counts.size()) ++counts[l];
    }
  }
  const auto it = std::max_element(counts.begin(), counts.end());
  return *it == 0 ? kFree : static_cast<Label>(it - counts.begin());
}

std::vector<Label> majority_prediction(const VoxelGrid& gt, Label majority) {
  std::vector<Label> out(gt.labels.size(), kFree);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Label l = gt.labels[i];
    if (l != kFree && l != kIgnore) out[i] = majority;
  }
  return out;
}

MapResult metric_map(std::span<const ScoredBox> detections, std::span<const ScoredBox> gts,
                     int num_classes, std::span<const double> iou_thresholds) {
  if (iou_thresholds.empty()) throw std::invalid_argument("metric_map: no IoU thresholds");
  MapResult res;
  res.ap_per_class.assign(num_classes, kNaN);
  std::vector<double> ap_sum(num_classes, 0.0);
  std::vector<int> gt_count(num_classes, 0);
  for (const auto& g : gts) {
    if (g.class_id < 0 || g.class_id >= num_classes) throw std::invalid_argument("metric_map: bad GT class");
    ++gt_count[g.class_id];
  }

  for (double thr : iou_thresholds) {
    for (int c = 0; c < num_classes; ++c) {
      if (gt_count[c] == 0) continue;
      std::vector<int> det_idx;
      for (int i = 0; i < static_cast<int>(detections.size()); ++i) {
        if (detections[i].class_id == c) det_idx.push_back(i);
      }
      std::stable_sort(det_idx.begin(), det_idx.end(), [&](int a, int b) {
        return detections[a].confidence > detections[b].confidence;
      });
      std::vector<int> gt_idx;
      for (int i = 0; i < static_cast<int>(gts.size()); ++i) {
        if (gts[i].class_id == c) gt_idx.push_back(i);
      }
      std::vector<char> matched(gts.size(), 0);
      std::vector<double> prec, rec;
      int tp = 0, fp = 0;
      for (int d : det_idx) {
        double best = -1;
        int best_g = -1;
        for (int g : gt_idx) {
          if (gts[g].image != detections[d].image || matched[g]) continue;
          const double v = iou(detections[d].box, gts[g].box);
          if (v > best) {
            best = v;
            best_g = g;
          }
        }
        if (best_g >= 0 && best >= thr) {
          matched[best_g] = 1;
          ++tp;
        } else {
          ++fp;
        }
        prec.push_back(static_cast<double>(tp) / (tp + fp));
        rec.push_back(static_cast<double>(tp) / gt_count[c]);
      }
      // Precision envelope, then integrate over recall steps.
      for (int i = static_cast<int>(prec.size()) - 2; i >= 0; --i) prec[i] = std::max(prec[i], prec[i + 1]);
      double ap = 0, prev_r = 0;
      for (std::size_t i = 0; i < prec.size(); ++i) {
        ap += (rec[i] - prev_r) * prec[i];
        prev_r = rec[i];
      }
      ap_sum[c] += ap;
    }
  }

  double total = 0;
  int n = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (gt_count[c] == 0) continue;
    res.ap_per_class[c] = ap_sum[c] / static_cast<double>(iou_thresholds.size());
    total += res.ap_per_class[c];
    ++n;
  }
  res.map = n ? total / n : 0.0;
  return res;
}

}  // namespace mixocc
