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

#include <atomic>
#include <map>
#include <string>
#include <vector>

#include "labelgen/labelgen.hpp"
#include "nn/config.hpp"
#include "nn/layers.hpp"
#include "training/hungarian.hpp"

namespace mixocc {

/// Mean over elements of -a_t (1 - p_t)^gamma log p_t with p = sigmoid(logits).
/// a_t = alpha for positives and 1 - alpha for negatives; alpha < 0 turns the
/// class weighting off (a_t = 1).
Tensor loss_focal(const Tensor& logits, const Tensor& targets, double alpha, double gamma);
/// Elementwise version of the above (no reduction).
Tensor focal_elementwise(const Tensor& logits, const Tensor& targets, double alpha, double gamma);
/// 1 - (2 sum(p t) + eps) / (sum p + sum t + eps) over all elements.
Tensor loss_dice(const Tensor& probs, const Tensor& targets, double eps = 1.0);
/// Mean binary cross-entropy on probabilities (clamped away from 0 and 1).
Tensor loss_bce(const Tensor& probs, const Tensor& targets);
/// Same loss computed stably from logits.
Tensor loss_bce_logits(const Tensor& logits, const Tensor& targets);

/// Elementwise GIoU of (cx, cy, w, h) boxes [N, 4].
Tensor giou2d(const Tensor& a, const Tensor& b);
/// Pairwise GIoU [N, M].
Tensor giou2d_pairwise(const Tensor& a, const Tensor& b);
/// Elementwise GIoU of (center xyz, size xyz) boxes [N, 6].
Tensor giou3d(const Tensor& a, const Tensor& b);

/// Detection targets of one image.
struct DetTargets {
  Tensor classes;  // [n] int64 index into the foreground class list
  Tensor boxes2d;  // [n, 4] normalized cx, cy, w, h
  Tensor boxes3d;  // [n, 6] camera frame center and size, meters
  std::int64_t size() const { return classes.defined() ? classes.size(0) : 0; }
};

DetTargets make_det_targets(const std::vector<ObjectLabel>& labels, const CameraModel& cam,
                            const CategorySplit& split, const torch::TensorOptions& opts);

/// Matched (prediction, target) index pairs of one image.
struct Match {
  std::vector<std::int64_t> pred;
  std::vector<std::int64_t> gt;
};

/// Number of Hungarian matchings on predictions since start or the last reset.
std::int64_t hungarian_calls();
void reset_hungarian_calls();

/// Bipartite matching of targets to predictions under
/// class * focal cost + l1 * |box|_1 + giou * (1 - GIoU).
Match hungarian_match(const Tensor& logits, const Tensor& boxes2d, const DetTargets& t, const LossWeights& w);

/// Unweighted detection terms, each summed over matched pairs and divided by
/// the number of targets in the batch (at least one).
struct DetTerms {
  Tensor cls, box2d, giou2d, box3d, giou3d;
};

/// `boxes3d` may be undefined (encoder proposals).
DetTerms detection_terms(const Tensor& logits, const Tensor& boxes2d, const Tensor& boxes3d,
                         const std::vector<DetTargets>& targets, const std::vector<Match>& matches,
                         const LossWeights& w, double box3d_scale);

/// Named unweighted loss terms. Keys: cls, box2d, giou2d, box3d, giou3d,
/// background, foreground, focal, dice2.
using LossTerms = std::map<std::string, Tensor>;

void accumulate(LossTerms& into, const DetTerms& d);
/// cls + sum of lambda * term.
Tensor total_loss(const LossTerms& terms, const LossWeights& w);
double weight_of(const std::string& term, const LossWeights& w);

}  // namespace mixocc
