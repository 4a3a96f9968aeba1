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

#include <string>
#include <vector>

#include "json.hpp"
#include "synthdata/scene.hpp"

namespace mixocc {

struct DetectorConfig {
  std::vector<int> backbone_channels{32, 64, 128, 128};
  int num_levels = 3;  // feature scales taken from the last stages
  int d_model = 64;
  int n_heads = 4;
  int n_points = 4;
  int ffn_dim = 128;
  int enc_layers = 2;
  int dec_layers = 2;
  int num_queries = 50;
  double roi_base = 0.05;  // preset ROI side at the finest scale, normalized
  double depth_prior = 8.0;  // meters
  double size_prior = 1.0;   // meters
  double box3d_scale = 8.0;  // center normalization for the 3D L1 term
  double conf_threshold = 0.5;
  int max_fg = 16;
  bool aux_loss = true;
  bool freeze_encoder_pretrain = false;
  // Refined boxes feed the next layer's reference and the 3D head as
  // constants. Off only for exact end-to-end gradient checks.
  bool detach_boxes = true;
};

struct OccDecoderConfig {
  int levels = 2;  // L
  // Retained background queries after each upsample: K_l = ceil(f_l * cells_l)
  // unless `k` lists explicit values. `dense` keeps every child.
  std::vector<double> k_fractions{0.35, 0.17};
  std::vector<int> k;
  bool dense = false;
  double enlarge = 0.5;
  bool group_attention = false;
  // Training builds foreground query boxes from the matched ground-truth box
  // instead of the (detached) predicted box.
  bool train_gt_boxes = true;
  int box_freqs = 8;
  double fg_threshold = 0.5;
  double bg_threshold = 0.5;
};

struct SemHeadConfig {
  int layers = 4;
};

struct LossWeights {
  double box2d = 5, giou2d = 2, box3d = 5, giou3d = 2;
  double background = 1, foreground = 1, focal = 2, dice2 = 2;
  double focal_alpha = 0.25, focal_gamma = 2.0;
  // Main-phase matcher.
  double match_class = 2, match_l1 = 5, match_giou = 2;
};

enum class Phase { pretrain, main };

struct TrainConfig {
  int pretrain_epochs = 5;
  int epochs = 20;
  double pretrain_lr = 5e-4;
  double lr = 5e-4;
  double weight_decay = 0.01;
  int batch_size = 4;
  std::uint64_t seed = 0;
  bool train_occupancy = true;  // false: detector-only training
  bool freeze_detector = false;  // main phase
  int val_scenes = 50;
  double grad_clip = 1.0;  // 0 disables
  std::vector<double> map_iou{0.5};
  LossWeights loss;
};

struct Config {
  SceneConfig data = SceneConfig::toy();
  DetectorConfig detector;
  OccDecoderConfig occdecoder;
  SemHeadConfig semhead;
  TrainConfig training;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  /// Retained background count after upsample step `l` (1..L).
  int k_at(int l) const;
  int num_fg() const { return static_cast<int>(data.split.foreground.size()); }
  int num_bg() const { return static_cast<int>(data.split.background.size()); }
};

void to_json(nlohmann::json& j, const Config& c);
void from_json(const nlohmann::json& j, Config& c);

Config load_config(const std::string& path);
void save_config(const std::string& path, const Config& c);

const char* phase_name(Phase p);

}  // namespace mixocc
