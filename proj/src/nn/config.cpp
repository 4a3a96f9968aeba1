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


#include "nn/config.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace mixocc {

const char* phase_name(Phase p) { return p == Phase::pretrain ? "pretrain" : "main"; }

void Config::validate() const {
  data.validate();
  auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
  const DetectorConfig& d = detector;
  if (d.backbone_channels.size() < static_cast<std::size_t>(d.num_levels) || d.num_levels < 1)
    fail("detector.num_levels exceeds backbone stages");
  if (d.d_model % d.n_heads != 0) fail("detector.d_model must be divisible by n_heads");
  if (d.d_model % 4 != 0) fail("detector.d_model must be divisible by 4");
  if (d.num_queries < 1) fail("detector.num_queries must be positive");
  if (d.max_fg < 0) fail("detector.max_fg must be >= 0");
  const int stride = 1 << (1 + static_cast<int>(d.backbone_channels.size()));
  if (data.image_width % stride || data.image_height % stride)
    fail("image size must be divisible by the backbone stride");
  int locations = 0;
  for (int s = 0; s < d.num_levels; ++s) {
    const int st = stride >> s;
    locations += (data.image_width / st) * (data.image_height / st);
  }
  if (d.num_queries > locations) fail("detector.num_queries exceeds feature locations");
  if (occdecoder.levels != data.decoder_levels) fail("occdecoder.levels must equal data.decoder_levels");
  if (occdecoder.levels < 1) fail("occdecoder.levels must be >= 1");
  if (!occdecoder.dense && occdecoder.k.empty() &&
      occdecoder.k_fractions.size() != static_cast<std::size_t>(occdecoder.levels) &&
      occdecoder.k_fractions.size() != 1)
    fail("occdecoder.k_fractions needs one value or one per level");
  if (!occdecoder.k.empty() && occdecoder.k.size() != static_cast<std::size_t>(occdecoder.levels))
    fail("occdecoder.k needs one value per level");
  for (int l = 1; l <= occdecoder.levels; ++l)
    if (k_at(l) < 1) fail("occdecoder K must be >= 1");
  if (semhead.layers < 0) fail("semhead.layers must be >= 0");
  const LossWeights& w = training.loss;
  for (double v : {w.box2d, w.giou2d, w.box3d, w.giou3d, w.background, w.foreground, w.focal, w.dice2})
    if (!(v > 0)) fail("loss weights must be positive");
  if (training.batch_size < 1) fail("training.batch_size must be >= 1");
  if (training.epochs < 0 || training.pretrain_epochs < 0) fail("epochs must be >= 0");
  if (training.map_iou.empty()) fail("training.map_iou must not be empty");
}

int Config::k_at(int l) const {
  const int L = occdecoder.levels;
  const std::int64_t cells = data.grid.cells() >> (3 * (L - l));
  if (occdecoder.dense) return static_cast<int>(cells);
  if (!occdecoder.k.empty()) return occdecoder.k.at(l - 1);
  const double f = occdecoder.k_fractions.size() == 1 ? occdecoder.k_fractions[0]
                                                      : occdecoder.k_fractions.at(l - 1);
  return static_cast<int>(std::min<std::int64_t>(cells, static_cast<std::int64_t>(std::ceil(f * cells - 1e-9))));
}

void to_json(nlohmann::json& j, const Config& c) {
  const auto& d = c.detector;
  const auto& o = c.occdecoder;
  const auto& t = c.training;
  const auto& w = t.loss;
  j = {{"data", c.data},
       {"detector",
        {{"backbone_channels", d.backbone_channels},
         {"num_levels", d.num_levels},
         {"d_model", d.d_model},
         {"n_heads", d.n_heads},
         {"n_points", d.n_points},
         {"ffn_dim", d.ffn_dim},
         {"enc_layers", d.enc_layers},
         {"dec_layers", d.dec_layers},
         {"num_queries", d.num_queries},
         {"roi_base", d.roi_base},
         {"depth_prior", d.depth_prior},
         {"size_prior", d.size_prior},
         {"box3d_scale", d.box3d_scale},
         {"conf_threshold", d.conf_threshold},
         {"max_fg", d.max_fg},
         {"aux_loss", d.aux_loss},
         {"freeze_encoder_pretrain", d.freeze_encoder_pretrain},
         {"detach_boxes", d.detach_boxes}}},
       {"occdecoder",
        {{"levels", o.levels},
         {"k_fractions", o.k_fractions},
         {"k", o.k},
         {"dense", o.dense},
         {"enlarge", o.enlarge},
         {"group_attention", o.group_attention},
         {"train_gt_boxes", o.train_gt_boxes},
         {"box_freqs", o.box_freqs},
         {"fg_threshold", o.fg_threshold},
         {"bg_threshold", o.bg_threshold}}},
       {"semhead", {{"layers", c.semhead.layers}}},
       {"training",
        {{"pretrain_epochs", t.pretrain_epochs},
         {"epochs", t.epochs},
         {"pretrain_lr", t.pretrain_lr},
         {"lr", t.lr},
         {"weight_decay", t.weight_decay},
         {"batch_size", t.batch_size},
         {"seed", t.seed},
         {"train_occupancy", t.train_occupancy},
         {"freeze_detector", t.freeze_detector},
         {"val_scenes", t.val_scenes},
         {"grad_clip", t.grad_clip},
         {"map_iou", t.map_iou},
         {"loss",
          {{"box2d", w.box2d},
           {"giou2d", w.giou2d},
           {"box3d", w.box3d},
           {"giou3d", w.giou3d},
           {"background", w.background},
           {"foreground", w.foreground},
           {"focal", w.focal},
           {"dice2", w.dice2},
           {"focal_alpha", w.focal_alpha},
           {"focal_gamma", w.focal_gamma},
           {"match_class", w.match_class},
           {"match_l1", w.match_l1},
           {"match_giou", w.match_giou}}}}}};
}

namespace {

template <typename T>
void opt(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) j.at(key).get_to(dst);
}

}  // namespace

void from_json(const nlohmann::json& j, Config& c) {
  c = Config{};
  if (j.contains("data")) c.data = j.at("data").get<SceneConfig>();
  if (j.contains("detector")) {
    const auto& s = j.at("detector");
    auto& d = c.detector;
    opt(s, "backbone_channels", d.backbone_channels);
    opt(s, "num_levels", d.num_levels);
    opt(s, "d_model", d.d_model);
    opt(s, "n_heads", d.n_heads);
    opt(s, "n_points", d.n_points);
    opt(s, "ffn_dim", d.ffn_dim);
    opt(s, "enc_layers", d.enc_layers);
    opt(s, "dec_layers", d.dec_layers);
    opt(s, "num_queries", d.num_queries);
    opt(s, "roi_base", d.roi_base);
    opt(s, "depth_prior", d.depth_prior);
    opt(s, "size_prior", d.size_prior);
    opt(s, "box3d_scale", d.box3d_scale);
    opt(s, "conf_threshold", d.conf_threshold);
    opt(s, "max_fg", d.max_fg);
    opt(s, "aux_loss", d.aux_loss);
    opt(s, "freeze_encoder_pretrain", d.freeze_encoder_pretrain);
    opt(s, "detach_boxes", d.detach_boxes);
  }
  if (j.contains("occdecoder")) {
    const auto& s = j.at("occdecoder");
    auto& o = c.occdecoder;
    opt(s, "levels", o.levels);
    opt(s, "k_fractions", o.k_fractions);
    opt(s, "k", o.k);
    opt(s, "dense", o.dense);
    opt(s, "enlarge", o.enlarge);
    opt(s, "group_attention", o.group_attention);
    opt(s, "train_gt_boxes", o.train_gt_boxes);
    opt(s, "box_freqs", o.box_freqs);
    opt(s, "fg_threshold", o.fg_threshold);
    opt(s, "bg_threshold", o.bg_threshold);
  }
  if (j.contains("semhead")) opt(j.at("semhead"), "layers", c.semhead.layers);
  if (j.contains("training")) {
    const auto& s = j.at("training");
    auto& t = c.training;
    opt(s, "pretrain_epochs", t.pretrain_epochs);
    opt(s, "epochs", t.epochs);
    opt(s, "pretrain_lr", t.pretrain_lr);
    opt(s, "lr", t.lr);
    opt(s, "weight_decay", t.weight_decay);
    opt(s, "batch_size", t.batch_size);
    opt(s, "seed", t.seed);
    opt(s, "train_occupancy", t.train_occupancy);
    opt(s, "freeze_detector", t.freeze_detector);
    opt(s, "val_scenes", t.val_scenes);
    opt(s, "grad_clip", t.grad_clip);
    opt(s, "map_iou", t.map_iou);
    if (s.contains("loss")) {
      const auto& l = s.at("loss");
      auto& w = t.loss;
      opt(l, "box2d", w.box2d);
      opt(l, "giou2d", w.giou2d);
      opt(l, "box3d", w.box3d);
      opt(l, "giou3d", w.giou3d);
      opt(l, "background", w.background);
      opt(l, "foreground", w.foreground);
      opt(l, "focal", w.focal);
      opt(l, "dice2", w.dice2);
      opt(l, "focal_alpha", w.focal_alpha);
      opt(l, "focal_gamma", w.focal_gamma);
      opt(l, "match_class", w.match_class);
      opt(l, "match_l1", w.match_l1);
      opt(l, "match_giou", w.match_giou);
    }
  }
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config: " + path + ": " + e.what());
  }
  Config c = j.get<Config>();
  c.validate();
  return c;
}

void save_config(const std::string& path, const Config& c) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("config: cannot write " + path);
  out << nlohmann::json(c).dump(2) << "\n";
}

}  // namespace mixocc
