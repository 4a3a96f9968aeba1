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


#include "occdecoder/occdecoder.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace mixocc {

namespace {

Tensor box_row_tensor(const std::vector<Box3D>& boxes) {
  std::vector<double> v;
  v.reserve(boxes.size() * 6);
  for (const auto& b : boxes) {
    const auto lo = b.min(), hi = b.max();
    v.insert(v.end(), {lo[0], lo[1], lo[2], hi[0], hi[1], hi[2]});
  }
  return torch::tensor(v, torch::kFloat64).view({static_cast<std::int64_t>(boxes.size()), 6});
}

// Child offsets in the x = c & 1, y = (c >> 1) & 1, z = c >> 2 convention.
Tensor child_bits() {
  std::vector<std::int64_t> v;
  for (int c = 0; c < 8; ++c) v.insert(v.end(), {c & 1, (c >> 1) & 1, c >> 2});
  return torch::tensor(v, torch::kInt64).view({8, 3});
}

}  // namespace

std::optional<Box3D> fg_query_box(const Box3D& camera_box, const CameraModel& cam, GridShape shape,
                                  double voxel_size, const Vec3& origin, double enlarge) {
  const Box3D g = enlarge_box(camera_to_grid(camera_box, cam), enlarge);
  Vec3 lo = g.min(), hi = g.max();
  const Vec3 glo = origin;
  const Vec3 ghi{origin[0] + shape.d * voxel_size, origin[1] + shape.w * voxel_size, origin[2] + shape.h * voxel_size};
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::max(lo[a], glo[a]);
    hi[a] = std::min(hi[a], ghi[a]);
    // Require at least a hundredth of a voxel per side.
    if (!(hi[a] - lo[a] > 1e-2 * voxel_size)) return std::nullopt;
  }
  return Box3D::from_corners(lo, hi, Frame::grid);
}

// Layer -----------------------------------------------------------------------------

OccLayerImpl::OccLayerImpl(int d, int h, int p, int levels, int ffn)
    : self_attn(register_module("self_attn", MultiHeadAttention(d, h))),
      cross_attn(register_module("cross_attn", MSDeformAttn(d, levels, h, p))),
      norm1_(register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})))),
      norm2_(register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})))),
      norm3_(register_module("norm3", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})))),
      ffn_(register_module("ffn", FFN(d, ffn))) {}

Tensor OccLayerImpl::forward(const Tensor& x, const Tensor& pos, const Tensor& ref, const Tensor& valid,
                             const FeaturePyramid& pyr, const Tensor& allowed) {
  // x [N, C] for one image.
  auto q = x.unsqueeze(0);
  auto p = pos.unsqueeze(0);
  auto h = norm1_(q);
  auto y = q + self_attn(h + p, h + p, h, allowed);
  h = norm2_(y);
  auto ca = cross_attn(h + p, ref.unsqueeze(0), pyr.memory, pyr.shapes);
  // Out-of-view queries keep their content.
  y = y + ca * valid.view({1, -1, 1});
  y = y + ffn_(norm3_(y));
  return y.squeeze(0);
}

// Decoder ---------------------------------------------------------------------------

OccDecoderImpl::OccDecoderImpl(const Config& cfg) : cfg_(cfg) {
  const auto& d = cfg.detector;
  const auto& o = cfg.occdecoder;
  for (int l = 1; l <= o.levels; ++l) ks_.push_back(cfg.k_at(l));
  lo_ = cfg.data.origin;
  extent_ = {cfg.data.grid.d * cfg.data.voxel_size, cfg.data.grid.w * cfg.data.voxel_size,
             cfg.data.grid.h * cfg.data.voxel_size};
  box_encoder_ = register_module("box_encoder", MLP(6 * 2 * o.box_freqs, d.d_model, d.d_model, 2));
  // Unit-scale encodings so the geometry is not drowned by detector content.
  box_norm_ = register_module("box_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d.d_model})));
  bg_embed_ = register_parameter("bg_embed", torch::randn({d.d_model}) * 0.02);
  for (int l = 0; l <= o.levels; ++l) {
    layers_->push_back(OccLayer(d.d_model, d.n_heads, d.n_points, d.num_levels, d.ffn_dim));
    heads_->push_back(torch::nn::Linear(d.d_model, 1));
    head_norms_->push_back(torch::nn::LayerNorm(torch::nn::LayerNormOptions({d.d_model})));
  }
  register_module("head_norms", head_norms_);
  register_module("layers", layers_);
  register_module("heads", heads_);
}

GridShape OccDecoderImpl::level_shape(int level) const {
  const int s = levels() - level;
  const auto& g = cfg_.data.grid;
  return {g.d >> s, g.w >> s, g.h >> s};
}

Tensor OccDecoderImpl::encode_box3d(const Tensor& boxes) {
  auto lo = torch::tensor(std::vector<double>(lo_.begin(), lo_.end()), torch::kFloat64);
  auto ext = torch::tensor(std::vector<double>(extent_.begin(), extent_.end()), torch::kFloat64);
  auto b = boxes.to(torch::kFloat64);
  auto center = (0.5 * (b.narrow(1, 0, 3) + b.narrow(1, 3, 3)) - lo) / ext;
  auto size = (b.narrow(1, 3, 3) - b.narrow(1, 0, 3)) / ext;
  auto feat = fourier_embed(torch::cat({center, size}, 1), cfg_.occdecoder.box_freqs);
  return box_norm_(box_encoder_(feat.to(bg_embed_.dtype())));
}

OccQuerySet OccDecoderImpl::init_queries(const std::vector<FgSeed>& fg, const torch::TensorOptions& opts) {
  OccQuerySet q;
  q.level = 0;
  const GridShape s = level_shape(0);
  const double side = cfg_.data.voxel_size * (1 << levels());
  std::vector<double> boxes;
  std::vector<std::int64_t> cells;
  for (int x = 0; x < s.d; ++x) {
    for (int y = 0; y < s.w; ++y) {
      for (int z = 0; z < s.h; ++z) {
        const Vec3 lo{lo_[0] + x * side, lo_[1] + y * side, lo_[2] + z * side};
        boxes.insert(boxes.end(), {lo[0], lo[1], lo[2], lo[0] + side, lo[1] + side, lo[2] + side});
        cells.insert(cells.end(), {x, y, z});
      }
    }
  }
  q.n_bg = static_cast<int>(s.cells());
  q.n_objects = static_cast<int>(fg.size());
  std::vector<Box3D> fg_boxes;
  for (const auto& f : fg) {
    fg_boxes.push_back(f.box);
    cells.insert(cells.end(), {0, 0, 0});
  }
  q.boxes = torch::cat({torch::tensor(boxes, torch::kFloat64).view({-1, 6}), box_row_tensor(fg_boxes)}, 0);
  q.cells = torch::tensor(cells, torch::kInt64).view({-1, 3});
  auto enc = encode_box3d(q.boxes).to(opts.dtype());
  std::vector<Tensor> content{bg_embed_.to(opts.dtype()).unsqueeze(0).expand({q.n_bg, -1})};
  for (const auto& f : fg) content.push_back(f.content.to(opts.dtype()).view({1, -1}));
  q.content = torch::cat(content, 0) + enc;
  return q;
}

std::pair<Tensor, Tensor> OccDecoderImpl::reference_points(const Tensor& boxes, const CameraModel& cam) const {
  const auto& T = cam.grid_to_camera;
  auto R = torch::tensor(std::vector<double>(T.r.begin(), T.r.end()), torch::kFloat64).view({3, 3});
  auto t = torch::tensor(std::vector<double>(T.t.begin(), T.t.end()), torch::kFloat64);
  auto c = 0.5 * (boxes.narrow(1, 0, 3) + boxes.narrow(1, 3, 3));
  auto pc = c.matmul(R.t()) + t;
  auto z = pc.select(1, 2);
  auto safe = torch::where(z > 0, z, torch::ones_like(z));
  auto u = cam.fx * pc.select(1, 0) / safe + cam.cx;
  auto v = cam.fy * pc.select(1, 1) / safe + cam.cy;
  auto valid = (z > 0) & (u >= 0) & (v >= 0) & (u < cam.width) & (v < cam.height);
  auto ref = torch::stack({u / cam.width, v / cam.height}, 1);
  ref = torch::where(valid.unsqueeze(1), ref, torch::full_like(ref, 0.5));
  return {ref, valid};
}

void OccDecoderImpl::layer(int level, OccQuerySet& q, const FeaturePyramid& pyr, const CameraModel& cam) {
  if (q.size() == 0) return;
  auto [ref, valid] = reference_points(q.boxes, cam);
  const auto dt = q.content.dtype();
  Tensor allowed;
  if (cfg_.occdecoder.group_attention && q.n_bg > 0 && q.n_objects > 0) {
    auto g = torch::arange(q.size(), torch::kInt64) >= q.n_bg;
    allowed = g.unsqueeze(1) == g.unsqueeze(0);
  }
  auto pos = encode_box3d(q.boxes).to(dt);
  q.content = layers_[level]->as<OccLayer>()->forward(q.content, pos, ref.to(dt), valid.to(dt), pyr, allowed);
}

Tensor OccDecoderImpl::occupancy_logits(int level, const Tensor& content) {
  auto h = head_norms_[level]->as<torch::nn::LayerNorm>()->forward(content);
  return heads_[level]->as<torch::nn::Linear>()->forward(h).squeeze(-1);
}

OccQuerySet OccDecoderImpl::upsample_step(const OccQuerySet& q, int k_next, OccLevelRecord* record) {
  if (q.level >= levels()) throw std::invalid_argument("upsample_step: already at the finest level");
  if (k_next < 1) throw std::invalid_argument("upsample_step: K must be at least 1");
  const auto N = q.size();
  auto bits = child_bits();
  // Children boxes: corners from the exact parent midpoint.
  auto lo = q.boxes.narrow(1, 0, 3).unsqueeze(1);
  auto hi = q.boxes.narrow(1, 3, 3).unsqueeze(1);
  auto mid = 0.5 * (lo + hi);
  auto bsel = bits.to(torch::kBool).unsqueeze(0);
  auto clo = torch::where(bsel, mid, lo);
  auto chi = torch::where(bsel, hi, mid);
  auto cboxes = torch::cat({clo, chi}, 2).view({N * 8, 6});
  auto ccells = (2 * q.cells.unsqueeze(1) + bits.unsqueeze(0)).view({N * 8, 3});
  auto ccontent = q.content.repeat_interleave(8, 0) + encode_box3d(cboxes).to(q.content.dtype());

  const std::int64_t nb = static_cast<std::int64_t>(q.n_bg) * 8;
  std::vector<std::int64_t> keep;
  Tensor child_logits;
  if (nb > 0) {
    child_logits = occupancy_logits(q.level + 1, ccontent.narrow(0, 0, nb));
    const GridShape s = level_shape(q.level + 1);
    auto cc = ccells.narrow(0, 0, nb).contiguous();
    auto sc = child_logits.detach().to(torch::kFloat64).contiguous();
    const auto* cp = cc.data_ptr<std::int64_t>();
    const auto* sp = sc.data_ptr<double>();
    std::vector<std::int64_t> lin(nb);
    for (std::int64_t i = 0; i < nb; ++i) lin[i] = (cp[3 * i] * s.w + cp[3 * i + 1]) * s.h + cp[3 * i + 2];
    std::vector<std::int64_t> order(nb);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
      if (sp[a] != sp[b]) return sp[a] > sp[b];
      return lin[a] < lin[b];
    });
    order.resize(std::min<std::int64_t>(k_next, nb));
    std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) { return lin[a] < lin[b]; });
    keep = order;
  }
  auto keep_t = torch::tensor(keep, torch::kInt64);
  auto fg_rows = torch::arange(nb, N * 8, torch::kInt64);
  auto rows = torch::cat({keep_t, fg_rows});

  OccQuerySet out;
  out.level = q.level + 1;
  out.n_bg = static_cast<int>(keep.size());
  out.n_objects = q.n_objects;
  out.content = ccontent.index_select(0, rows);
  out.boxes = cboxes.index_select(0, rows);
  out.cells = ccells.index_select(0, rows);
  if (record) {
    record->child_logits = child_logits;
    record->child_cells = ccells.narrow(0, 0, nb);
    record->kept = keep_t;
  }
  return out;
}

OccOutput OccDecoderImpl::forward(const std::vector<FgSeed>& fg, const FeaturePyramid& pyr, const CameraModel& cam) {
  OccOutput out;
  const int L = levels();
  auto q = init_queries(fg, torch::TensorOptions().dtype(pyr.memory.dtype()));
  for (const auto& f : fg) out.fg_boxes.push_back(f.box);
  for (int l = 0; l <= L; ++l) {
    out.counts.bg_processed += q.n_bg;
    out.counts.fg_processed += static_cast<std::int64_t>(q.n_objects) * q.fg_per_object();
    out.counts.bg_per_level.push_back(q.n_bg);
    layer(l, q, pyr, cam);
    OccLevelRecord rec;
    rec.bg_logits = occupancy_logits(l, q.content.narrow(0, 0, q.n_bg));
    rec.bg_cells = q.cells.narrow(0, 0, q.n_bg);
    if (l < L) {
      out.counts.children_scored += 8LL * q.n_bg;
      q = upsample_step(q, k_at(l + 1), &rec);
    }
    out.levels.push_back(std::move(rec));
  }
  out.bg_features = q.content.narrow(0, 0, q.n_bg);
  out.bg_cells = q.cells.narrow(0, 0, q.n_bg);
  out.bg_logits = out.levels.back().bg_logits;
  const int res = 1 << L;
  const std::int64_t per = static_cast<std::int64_t>(res) * res * res;
  if (q.n_objects > 0) {
    auto fl = occupancy_logits(L, q.content.narrow(0, q.n_bg, q.n_objects * per)).view({q.n_objects, per});
    auto fc = q.cells.narrow(0, q.n_bg, q.n_objects * per).view({q.n_objects, per, 3});
    auto lin = (fc.select(2, 0) * res + fc.select(2, 1)) * res + fc.select(2, 2);
    auto perm = lin.argsort(/*stable=*/false, /*dim=*/1);
    out.fg_logits = fl.gather(1, perm);
  } else {
    out.fg_logits = torch::zeros({0, per}, pyr.memory.options());
  }
  return out;
}

double retained_recall(const Tensor& cells, const Tensor& occupancy, GridShape shape) {
  auto occ = occupancy.to(torch::kFloat64).reshape(-1);
  if (occ.size(0) != shape.cells()) throw std::invalid_argument("retained_recall: occupancy size mismatch");
  const double total = occ.sum().item<double>();
  if (total == 0) return 1.0;
  if (cells.size(0) == 0) return 0.0;
  auto c = cells.to(torch::kInt64);
  auto lin = (c.select(1, 0) * shape.w + c.select(1, 1)) * shape.h + c.select(1, 2);
  auto kept = torch::zeros_like(occ);
  kept.index_fill_(0, lin, 1.0);
  return (kept * occ).sum().item<double>() / total;
}

}  // namespace mixocc
