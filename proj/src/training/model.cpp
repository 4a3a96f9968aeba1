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


#include "training/model.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace mixocc {

Tensor image_tensor(const Image& img) {
  auto t = torch::from_blob(const_cast<float*>(img.rgb.data()), {img.height, img.width, 3}, torch::kFloat32);
  return ((t.permute({2, 0, 1}) - 0.5) * 2.0).contiguous();
}

PreparedScene prepare_scene(const ScenePair& scene, const Config& cfg) {
  PreparedScene p;
  p.image = image_tensor(scene.image);
  p.camera = scene.camera;
  p.gt = scene.gt;
  p.labels = scene.labels;
  p.targets = make_det_targets(scene.labels, scene.camera, cfg.data.split, torch::kFloat32);
  const auto pyr = build_occupancy_pyramid(occupancy(scene.gt, cfg.data.split.background), cfg.occdecoder.levels);
  for (const auto& lv : pyr.levels) {
    std::vector<float> v(lv.cells.begin(), lv.cells.end());
    p.bg_levels.push_back(torch::tensor(v, torch::kFloat32));
  }
  return p;
}

std::vector<ScoredBox> gt_boxes(const PreparedScene& scene, const CategorySplit& split, int image) {
  std::vector<ScoredBox> out;
  for (const auto& l : scene.labels) out.push_back({image, split.foreground_index(l.class_id), 1.0, l.box2d});
  return out;
}

OccupancyModelImpl::OccupancyModelImpl(const Config& cfg) : cfg_(cfg) {
  cfg.validate();
  const auto& d = cfg.detector;
  detector = register_module("detector", Detector(d, cfg.num_fg(), cfg.data.image_width, cfg.data.image_height));
  occ = register_module("occ", OccDecoder(cfg));
  semhead = register_module("semhead", MaskFormer(cfg.num_bg(), d.d_model, d.n_heads, d.ffn_dim, cfg.semhead.layers));
  rois_ = preset_rois(detector->level_shapes(), d.roi_base);
}

std::vector<Tensor> OccupancyModelImpl::occupancy_parameters() {
  auto p = occ->parameters();
  for (auto& t : semhead->parameters()) p.push_back(t);
  return p;
}

namespace {

Tensor stack_images(const std::vector<const PreparedScene*>& batch, torch::Dtype dt) {
  std::vector<Tensor> v;
  for (const auto* s : batch) v.push_back(s->image);
  return torch::stack(v).to(dt);
}

std::vector<Box2D> boxes_of(const Tensor& t) {
  auto c = t.detach().to(torch::kFloat64).contiguous();
  std::vector<Box2D> out;
  for (std::int64_t i = 0; i < c.size(0); ++i) {
    const double* p = c[i].data_ptr<double>();
    out.push_back({p[0], p[1], p[2], p[3]});
  }
  return out;
}

Tensor gather_cells(const Tensor& level, const Tensor& cells, GridShape s) {
  auto lin = (cells.select(1, 0) * s.w + cells.select(1, 1)) * s.h + cells.select(1, 2);
  return level.index_select(0, lin);
}

}  // namespace

LossTerms OccupancyModelImpl::compute_losses(const std::vector<const PreparedScene*>& batch, Phase phase,
                                             bool occupancy, ForwardStats* stats) {
  const auto dt = detector->rois().scalar_type();
  auto images = stack_images(batch, dt);
  std::vector<CameraModel> cams;
  std::vector<DetTargets> targets;
  for (const auto* s : batch) {
    cams.push_back(s->camera);
    DetTargets t = s->targets;
    t.boxes2d = t.boxes2d.to(dt);
    t.boxes3d = t.boxes3d.to(dt);
    targets.push_back(t);
  }
  auto intr = intrinsics_tensor(cams, torch::TensorOptions().dtype(dt));
  const auto& w = cfg_.training.loss;
  const auto B = static_cast<std::int64_t>(batch.size());
  if (stats) {
    stats->n_gt = 0;
    for (const auto& t : targets) stats->n_gt += t.size();
  }

  LossTerms terms;
  DetectorOutput out;
  std::vector<Match> enc_m(B), last_m(B);
  if (phase == Phase::pretrain) {
    std::vector<std::vector<std::int64_t>> forced(B);
    for (std::int64_t b = 0; b < B; ++b) {
      const auto gts = boxes_of(targets[b].boxes2d);
      const auto as = early_match(rois_, gts, w.match_l1, w.match_giou);
      for (std::size_t g = 0; g < gts.size(); ++g) {
        forced[b].push_back(as.col_of_row[g]);
        enc_m[b].pred.push_back(as.col_of_row[g]);
        enc_m[b].gt.push_back(static_cast<std::int64_t>(g));
      }
    }
    out = detector->forward(images, intr, &forced);
    std::vector<Match> dec_m(B);
    for (std::int64_t b = 0; b < B; ++b) {
      auto sel = out.selected[b].contiguous();
      const auto* sp = sel.data_ptr<std::int64_t>();
      for (std::size_t g = 0; g < forced[b].size(); ++g) {
        const auto j = std::find(sp, sp + sel.numel(), forced[b][g]) - sp;
        dec_m[b].pred.push_back(j);
        dec_m[b].gt.push_back(static_cast<std::int64_t>(g));
      }
    }
    accumulate(terms, detection_terms(out.enc_logits, out.enc_boxes, Tensor(), targets, enc_m, w,
                                      cfg_.detector.box3d_scale));
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
      if (!cfg_.detector.aux_loss && l + 1 < out.layers.size()) continue;
      const auto& lo = out.layers[l];
      accumulate(terms, detection_terms(lo.logits, lo.boxes2d, lo.boxes3d, targets, dec_m, w,
                                        cfg_.detector.box3d_scale));
    }
    last_m = dec_m;
  } else {
    out = detector->forward(images, intr);
    for (std::int64_t b = 0; b < B; ++b) enc_m[b] = hungarian_match(out.enc_logits[b], out.enc_boxes[b], targets[b], w);
    accumulate(terms, detection_terms(out.enc_logits, out.enc_boxes, Tensor(), targets, enc_m, w,
                                      cfg_.detector.box3d_scale));
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
      if (!cfg_.detector.aux_loss && l + 1 < out.layers.size()) continue;
      const auto& lo = out.layers[l];
      std::vector<Match> m(B);
      for (std::int64_t b = 0; b < B; ++b) m[b] = hungarian_match(lo.logits[b], lo.boxes2d[b], targets[b], w);
      accumulate(terms, detection_terms(lo.logits, lo.boxes2d, lo.boxes3d, targets, m, w,
                                        cfg_.detector.box3d_scale));
      if (l + 1 == out.layers.size()) last_m = m;
    }
    if (occupancy) occupancy_losses(batch, out, last_m, terms, stats);
  }
  return terms;
}

void OccupancyModelImpl::occupancy_losses(const std::vector<const PreparedScene*>& batch, const DetectorOutput& out,
                                          const std::vector<Match>& matches, LossTerms& terms, ForwardStats* stats) {
  const auto& w = cfg_.training.loss;
  const auto& split = cfg_.data.split;
  const int L = cfg_.occdecoder.levels;
  const int res = 1 << L;
  const auto& last = out.layers.back();
  Tensor bg_sum, mf_focal, mf_dice;
  std::vector<Tensor> fg_dice;
  int mf_images = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& s = *batch[b];
    std::vector<FgSeed> seeds;
    std::vector<Label> seed_class;
    auto b3 = last.boxes3d[b].detach().to(torch::kFloat64).contiguous();
    for (std::size_t i = 0; i < matches[b].pred.size() && static_cast<int>(seeds.size()) < cfg_.detector.max_fg;
         ++i) {
      const auto j = matches[b].pred[i];
      const double* p = b3[j].data_ptr<double>();
      Box3D cb{{p[0], p[1], p[2]}, {p[3], p[4], p[5]}, Frame::camera};
      if (cfg_.occdecoder.train_gt_boxes) cb = grid_to_camera(s.labels[matches[b].gt[i]].box3d, s.camera);
      auto box = fg_query_box(cb, s.camera, cfg_.data.grid, cfg_.data.voxel_size, cfg_.data.origin,
                              cfg_.occdecoder.enlarge);
      if (!box) continue;
      seeds.push_back({out.content[b][j], *box});
      seed_class.push_back(s.labels[matches[b].gt[i]].class_id);
    }
    auto o = occ->forward(seeds, out.pyramid.image(static_cast<std::int64_t>(b)), s.camera);
    if (stats) {
      stats->counts.bg_processed += o.counts.bg_processed;
      stats->counts.fg_processed += o.counts.fg_processed;
      stats->counts.children_scored += o.counts.children_scored;
    }

    // Background occupancy: every level's retained queries and every scored child.
    Tensor bg;
    int groups = 0;
    for (int l = 0; l <= L; ++l) {
      const auto& rec = o.levels[l];
      const auto& lv = s.bg_levels[L - l];
      auto t = gather_cells(lv, rec.bg_cells, occ->level_shape(l)).to(rec.bg_logits.dtype());
      auto g = loss_bce_logits(rec.bg_logits, t);
      bg = bg.defined() ? bg + g : g;
      ++groups;
      if (l < L) {
        auto tc = gather_cells(s.bg_levels[L - l - 1], rec.child_cells, occ->level_shape(l + 1))
                      .to(rec.child_logits.dtype());
        bg = bg + loss_bce_logits(rec.child_logits, tc);
        ++groups;
      }
    }
    bg = bg / groups;
    bg_sum = bg_sum.defined() ? bg_sum + bg : bg;

    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const Label c = seed_class[i];
      const auto lg = resample_local_grid(s.gt, seeds[i].box, res, std::span<const Label>(&c, 1));
      std::vector<float> tv(lg.cells.begin(), lg.cells.end());
      auto t = torch::tensor(tv, torch::kFloat32).to(o.fg_logits.dtype());
      fg_dice.push_back(loss_dice(torch::sigmoid(o.fg_logits[i]), t));
    }

    // MaskFormer on retained cells whose ground truth is a background class.
    if (o.bg_features.size(0) > 0) {
      auto cells = o.bg_cells.contiguous();
      const auto* cp = cells.data_ptr<std::int64_t>();
      std::vector<std::int64_t> cols, cls;
      for (std::int64_t n = 0; n < cells.size(0); ++n) {
        const int bi = split.background_index(s.gt.at(cp[3 * n], cp[3 * n + 1], cp[3 * n + 2]));
        if (bi < 0) continue;
        cols.push_back(n);
        cls.push_back(bi);
      }
      if (!cols.empty()) {
        auto logits = semhead->forward(o.bg_features).index_select(1, torch::tensor(cols, torch::kInt64));
        auto t = torch::zeros_like(logits);
        t.index_put_({torch::tensor(cls, torch::kInt64), torch::arange(static_cast<std::int64_t>(cols.size()))}, 1.0);
        auto f = loss_focal(logits, t, w.focal_alpha, w.focal_gamma);
        Tensor d;
        int nd = 0;
        auto probs = torch::sigmoid(logits);
        auto present = t.sum(1).gt(0);
        for (std::int64_t c = 0; c < logits.size(0); ++c) {
          if (!present[c].item<bool>()) continue;
          auto dc = loss_dice(probs[c], t[c]);
          d = d.defined() ? d + dc : dc;
          ++nd;
        }
        d = d / nd;
        mf_focal = mf_focal.defined() ? mf_focal + f : f;
        mf_dice = mf_dice.defined() ? mf_dice + d : d;
        ++mf_images;
      }
    }
  }
  auto zero = out.content.sum() * 0;
  terms["background"] = bg_sum / static_cast<double>(batch.size());
  if (fg_dice.empty()) {
    terms["foreground"] = zero;
  } else {
    terms["foreground"] = torch::stack(fg_dice).mean();
  }
  terms["focal"] = mf_images ? mf_focal / mf_images : zero;
  terms["dice2"] = mf_images ? mf_dice / mf_images : zero;
}

std::vector<Prediction> OccupancyModelImpl::predict(const Tensor& images, const std::vector<CameraModel>& cams,
                                                    bool occupancy) {
  torch::NoGradGuard ng;
  const auto dt = detector->rois().scalar_type();
  auto x = images.to(dt);
  auto intr = intrinsics_tensor(cams, torch::TensorOptions().dtype(dt));
  auto out = detector->forward(x, intr);
  const auto& last = out.layers.back();
  const auto& split = cfg_.data.split;
  const int res = 1 << cfg_.occdecoder.levels;
  std::vector<Prediction> preds(cams.size());
  for (std::size_t b = 0; b < cams.size(); ++b) {
    auto& p = preds[b];
    const auto& cam = cams[b];
    auto prob = torch::sigmoid(last.logits[b]).to(torch::kFloat64);
    auto [conf, cls] = prob.max(-1);
    conf = conf.contiguous();
    cls = cls.contiguous();
    auto b2 = last.boxes2d[b].to(torch::kFloat64).contiguous();
    auto b3 = last.boxes3d[b].to(torch::kFloat64).contiguous();
    const auto k = conf.size(0);
    for (std::int64_t j = 0; j < k; ++j) {
      const double* q = b2[j].data_ptr<double>();
      Box2D box{q[0] * cam.width, q[1] * cam.height, q[2] * cam.width, q[3] * cam.height};
      const int ci = static_cast<int>(cls[j].item<std::int64_t>());
      const double c = conf[j].item<double>();
      p.scored.push_back({static_cast<int>(b), ci, c, box});
      if (c >= cfg_.detector.conf_threshold) {
        const double* r = b3[j].data_ptr<double>();
        p.detections.push_back({split.foreground[ci], c, box, {{r[0], r[1], r[2]}, {r[3], r[4], r[5]}, Frame::camera},
                                static_cast<int>(j)});
      }
    }
    std::stable_sort(p.detections.begin(), p.detections.end(),
                     [](const Detection& a, const Detection& c) { return a.confidence > c.confidence; });
    if (static_cast<int>(p.detections.size()) > cfg_.detector.max_fg) p.detections.resize(cfg_.detector.max_fg);
    if (!occupancy) continue;

    std::vector<FgSeed> seeds;
    for (std::size_t i = 0; i < p.detections.size(); ++i) {
      const auto& d = p.detections[i];
      auto box = fg_query_box(d.box3d, cam, cfg_.data.grid, cfg_.data.voxel_size, cfg_.data.origin,
                              cfg_.occdecoder.enlarge);
      if (!box) continue;
      seeds.push_back({out.content[b][d.query], *box});
      p.object_detection.push_back(static_cast<int>(i));
    }
    auto o = occ->forward(seeds, out.pyramid.image(static_cast<std::int64_t>(b)), cam);
    p.counts = o.counts;
    auto fgp = torch::sigmoid(o.fg_logits).to(torch::kFloat64).contiguous();
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const auto& d = p.detections[p.object_detection[i]];
      FgObject obj{seeds[i].box, d.class_id, d.confidence, res, {}};
      const double* q = fgp[i].data_ptr<double>();
      for (std::int64_t n = 0; n < fgp.size(1); ++n) obj.occupied.push_back(q[n] >= cfg_.occdecoder.fg_threshold);
      p.objects.push_back(std::move(obj));
    }
    std::vector<Cell> bg_cells;
    std::vector<Label> bg_cls;
    if (o.bg_features.size(0) > 0) {
      auto classes = classify_bg(semhead->forward(o.bg_features), split.background);
      auto sc = torch::sigmoid(o.bg_logits).to(torch::kFloat64).contiguous();
      auto cells = o.bg_cells.contiguous();
      const auto* cp = cells.data_ptr<std::int64_t>();
      for (std::int64_t n = 0; n < cells.size(0); ++n) {
        if (sc[n].item<double>() < cfg_.occdecoder.bg_threshold) continue;
        bg_cells.push_back({static_cast<int>(cp[3 * n]), static_cast<int>(cp[3 * n + 1]), static_cast<int>(cp[3 * n + 2])});
        bg_cls.push_back(classes[n]);
      }
    }
    p.scene = assemble_scene(p.objects, bg_cells, bg_cls, cfg_.data.grid, cfg_.data.voxel_size, cfg_.data.origin);
  }
  return preds;
}

Prediction OccupancyModelImpl::predict(const PreparedScene& scene, bool occupancy) {
  return predict(scene.image.unsqueeze(0), {scene.camera}, occupancy).front();
}

SceneQuality scene_quality(const Prediction& pred, const PreparedScene& scene, const Config& cfg) {
  SceneQuality q;
  const int res = 1 << cfg.occdecoder.levels;
  for (const auto& l : scene.labels) {
    double best = -1;
    int best_det = -1;
    for (std::size_t i = 0; i < pred.detections.size(); ++i) {
      const auto& d = pred.detections[i];
      if (d.class_id != l.class_id) continue;
      const double g = giou(d.box2d, l.box2d);
      if (g > best) {
        best = g;
        best_det = static_cast<int>(i);
      }
    }
    q.det_giou.push_back(best);
    double dice = 0;
    const auto local = fg_query_box(grid_to_camera(l.box3d, scene.camera), scene.camera, cfg.data.grid,
                                    cfg.data.voxel_size, cfg.data.origin, cfg.occdecoder.enlarge);
    for (std::size_t o = 0; o < pred.objects.size() && local; ++o) {
      if (pred.object_detection[o] != best_det) continue;
      // Local ground truth lives in the object's own query box; the decoded
      // grid sits in the detection's box, which nearly coincides once
      // detection is accurate.
      const auto lg = resample_local_grid(scene.gt, *local, res, std::span<const Label>(&l.class_id, 1));
      dice = binary_dice(pred.objects[o].occupied, lg.cells);
    }
    q.fg_dice.push_back(dice);
  }
  BinaryGrid pred_bg(scene.gt.shape);
  for (std::size_t i = 0; i < pred_bg.cells.size(); ++i) pred_bg.cells[i] = pred.scene.source.size() > i && pred.scene.source[i] == -2;
  const auto gt_bg = occupancy(scene.gt, cfg.data.split.background);
  q.bg_iou = binary_iou(pred_bg.cells, gt_bg.cells);
  return q;
}

}  // namespace mixocc
