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


#include "detector/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mixocc {

namespace F = torch::nn::functional;

std::int64_t FeaturePyramid::locations() const {
  std::int64_t n = 0;
  for (const auto& [h, w] : shapes) n += static_cast<std::int64_t>(h) * w;
  return n;
}

Tensor FeaturePyramid::map(int s) const {
  std::int64_t start = 0;
  for (int i = 0; i < s; ++i) start += static_cast<std::int64_t>(shapes[i].first) * shapes[i].second;
  const auto [h, w] = shapes[s];
  return memory.narrow(1, start, static_cast<std::int64_t>(h) * w).transpose(1, 2).reshape({memory.size(0), -1, h, w});
}

FeaturePyramid FeaturePyramid::image(std::int64_t b) const {
  return {memory.narrow(0, b, 1), pos, shapes};
}

std::vector<Box2D> preset_rois(const LevelShapes& shapes, double base) {
  std::vector<Box2D> out;
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    const auto [h, w] = shapes[s];
    const double side = base * std::pow(2.0, static_cast<double>(s));
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double cx = (j + 0.5) / w, cy = (i + 0.5) / h;
        out.push_back(Box2D::from_corners(std::max(0.0, cx - side / 2), std::max(0.0, cy - side / 2),
                                          std::min(1.0, cx + side / 2), std::min(1.0, cy + side / 2)));
      }
    }
  }
  return out;
}

Tensor boxes_to_tensor(const std::vector<Box2D>& boxes, const torch::TensorOptions& opts) {
  std::vector<double> v;
  v.reserve(boxes.size() * 4);
  for (const auto& b : boxes) v.insert(v.end(), {b.cx, b.cy, b.w, b.h});
  return torch::tensor(v, torch::kFloat64).view({static_cast<std::int64_t>(boxes.size()), 4}).to(opts.dtype());
}

std::vector<std::int64_t> select_top_k(std::span<const double> scores, int k) {
  if (k < 1 || k > static_cast<int>(scores.size())) throw std::invalid_argument("select_top_k: k out of range");
  std::vector<std::int64_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::int64_t a, std::int64_t b) { return scores[a] > scores[b]; });
  idx.resize(k);
  return idx;
}

Assignment early_match(std::span<const Box2D> rois, std::span<const Box2D> gts, double l1_weight,
                       double giou_weight) {
  if (gts.empty()) return {};
  if (gts.size() > rois.size()) throw std::invalid_argument("early_match: more GT boxes than ROIs");
  CostMatrix c(static_cast<int>(gts.size()), static_cast<int>(rois.size()));
  for (std::size_t g = 0; g < gts.size(); ++g) {
    for (std::size_t r = 0; r < rois.size(); ++r) {
      const Box2D& a = gts[g];
      const Box2D& b = rois[r];
      const double l1 = std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) + std::abs(a.w - b.w) + std::abs(a.h - b.h);
      c(static_cast<int>(g), static_cast<int>(r)) = l1_weight * l1 + giou_weight * (1.0 - giou(a, b));
    }
  }
  return hungarian(c);
}

Tensor intrinsics_tensor(const std::vector<CameraModel>& cams, const torch::TensorOptions& opts) {
  std::vector<double> v;
  for (const auto& c : cams) v.insert(v.end(), {c.fx, c.fy, c.cx, c.cy});
  return torch::tensor(v, torch::kFloat64).view({static_cast<std::int64_t>(cams.size()), 4}).to(opts.dtype());
}

// Backbone ----------------------------------------------------------------------

namespace {

void conv_block(torch::nn::Sequential& seq, int in, int out, int stride) {
  seq->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1).bias(false)));
  seq->push_back(torch::nn::GroupNorm(torch::nn::GroupNormOptions(std::min(8, out), out)));
  seq->push_back(torch::nn::GELU());
}

}  // namespace

BackboneImpl::BackboneImpl(const std::vector<int>& channels) {
  int in = 3;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    torch::nn::Sequential stage;
    conv_block(stage, in, channels[i], 2);
    // The first stage downsamples twice.
    conv_block(stage, channels[i], channels[i], i == 0 ? 2 : 1);
    stages_->push_back(stage);
    in = channels[i];
  }
  register_module("stages", stages_);
}

std::vector<Tensor> BackboneImpl::forward(const Tensor& images) {
  std::vector<Tensor> outs;
  Tensor x = images;
  for (std::size_t i = 0; i < stages_->size(); ++i) {
    x = stages_[i]->as<torch::nn::Sequential>()->forward(x);
    outs.push_back(x);
  }
  return outs;
}

// Encoder / decoder layers -----------------------------------------------------

EncoderLayerImpl::EncoderLayerImpl(const DetectorConfig& c)
    : norm1_(register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({c.d_model})))),
      norm2_(register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({c.d_model})))),
      attn_(register_module("self_attn", MSDeformAttn(c.d_model, c.num_levels, c.n_heads, c.n_points))),
      ffn_(register_module("ffn", FFN(c.d_model, c.ffn_dim))) {}

Tensor EncoderLayerImpl::forward(const Tensor& x, const Tensor& pos, const Tensor& ref, const LevelShapes& shapes) {
  auto h = norm1_(x);
  auto y = x + attn_(h + pos, ref, h, shapes);
  return y + ffn_(norm2_(y));
}

DecoderLayerImpl::DecoderLayerImpl(const DetectorConfig& c)
    : norm1_(register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({c.d_model})))),
      norm2_(register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({c.d_model})))),
      norm3_(register_module("norm3", torch::nn::LayerNorm(torch::nn::LayerNormOptions({c.d_model})))),
      self_attn_(register_module("self_attn", MultiHeadAttention(c.d_model, c.n_heads))),
      cross_attn_(register_module("cross_attn", MSDeformAttn(c.d_model, c.num_levels, c.n_heads, c.n_points))),
      ffn_(register_module("ffn", FFN(c.d_model, c.ffn_dim))) {}

Tensor DecoderLayerImpl::forward(const Tensor& x, const Tensor& pos, const Tensor& ref_xy, const FeaturePyramid& pyr) {
  auto h = norm1_(x);
  auto y = x + self_attn_(h + pos, h + pos, h);
  h = norm2_(y);
  y = y + cross_attn_(h + pos, ref_xy, pyr.memory, pyr.shapes);
  return y + ffn_(norm3_(y));
}

// Detector ----------------------------------------------------------------------

DetectorImpl::DetectorImpl(const DetectorConfig& cfg, int num_classes, int image_width, int image_height)
    : cfg_(cfg), num_classes_(num_classes), width_(image_width), height_(image_height) {
  const int C = cfg.d_model;
  const int stages = static_cast<int>(cfg.backbone_channels.size());
  backbone_ = register_module("backbone", Backbone(cfg.backbone_channels));
  for (int s = 0; s < cfg.num_levels; ++s) {
    const int stage = stages - cfg.num_levels + s;
    const int stride = 1 << (stage + 2);
    shapes_.emplace_back(image_height / stride, image_width / stride);
    input_proj_->push_back(torch::nn::Sequential(
        torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg.backbone_channels[stage], C, 1)),
        torch::nn::GroupNorm(torch::nn::GroupNormOptions(8, C))));
  }
  register_module("input_proj", input_proj_);
  level_embed_ = register_parameter("level_embed", torch::randn({cfg.num_levels, C}) * 0.02);
  for (int i = 0; i < cfg.enc_layers; ++i) encoder_->push_back(EncoderLayer(cfg));
  register_module("encoder", encoder_);
  for (int i = 0; i < cfg.dec_layers; ++i) decoder_->push_back(DecoderLayer(cfg));
  register_module("decoder", decoder_);
  enc_norm_ = register_module("enc_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({C})));
  enc_output_ = register_module("enc_output", torch::nn::Linear(C, C));
  enc_output_norm_ = register_module("enc_output_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({C})));
  dec_norm_ = register_module("dec_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({C})));
  class_head_ = register_module("class_head", torch::nn::Linear(C, num_classes));
  enc_box_head_ = register_module("enc_box_head", MLP(C, C, 4, 3));
  box_head_ = register_module("box_head", MLP(C, C, 4, 3));
  box3d_head_ = register_module("box3d_head", MLP(C, C, 6, 3));
  query_pos_ = register_module("query_pos", MLP(C, C, C, 2));

  {
    torch::NoGradGuard ng;
    // Prior probability 0.01 for every class.
    class_head_->bias.fill_(-std::log((1 - 0.01) / 0.01));
    for (MLP* m : {&enc_box_head_, &box_head_, &box3d_head_}) {
      auto last = (*m)->modules(false).back();
      for (auto& p : last->parameters()) p.zero_();
    }
  }

  rois_ = register_buffer("rois", boxes_to_tensor(preset_rois(shapes_, cfg.roi_base), torch::kFloat32));
  std::vector<double> ref;
  for (const auto& [h, w] : shapes_) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        ref.push_back((j + 0.5) / w);
        ref.push_back((i + 0.5) / h);
      }
    }
  }
  ref_points_ = register_buffer("ref_points", torch::tensor(ref, torch::kFloat64).view({-1, 2}).to(torch::kFloat32));
  pos_ = register_buffer("pos", sine_embed(ref_points_, C / 4));
}

std::vector<Tensor> DetectorImpl::encoder_parameters() {
  std::vector<Tensor> out;
  for (auto* m : std::vector<torch::nn::Module*>{backbone_.get(), input_proj_.get(), encoder_.get(), enc_norm_.get()})
    for (auto& p : m->parameters()) out.push_back(p);
  out.push_back(level_embed_);
  return out;
}

FeaturePyramid DetectorImpl::encode_features(const Tensor& images) {
  TORCH_CHECK(images.dim() == 4 && images.size(1) == 3 && images.size(2) == height_ && images.size(3) == width_,
              "encode_features: expected images [B, 3, ", height_, ", ", width_, "], got ", images.sizes());
  auto feats = backbone_(images);
  const int stages = static_cast<int>(feats.size());
  std::vector<Tensor> flat;
  std::vector<Tensor> lvl;
  for (int s = 0; s < cfg_.num_levels; ++s) {
    auto f = input_proj_[s]->as<torch::nn::Sequential>()->forward(feats[stages - cfg_.num_levels + s]);
    const auto hw = f.size(2) * f.size(3);
    flat.push_back(f.flatten(2).transpose(1, 2));  // [B, hw, C]
    lvl.push_back(level_embed_[s].unsqueeze(0).expand({hw, -1}));
  }
  FeaturePyramid pyr;
  pyr.shapes = shapes_;
  pyr.pos = pos_ + torch::cat(lvl, 0);
  auto x = torch::cat(flat, 1);
  auto ref = ref_points_.unsqueeze(0).expand({x.size(0), -1, -1});
  for (std::size_t i = 0; i < encoder_->size(); ++i)
    x = encoder_[i]->as<EncoderLayer>()->forward(x, pyr.pos, ref, shapes_);
  pyr.memory = enc_norm_(x);
  return pyr;
}

Tensor DetectorImpl::select_queries(const Tensor& scores, int k,
                                    const std::vector<std::vector<std::int64_t>>* forced) const {
  const auto B = scores.size(0), N = scores.size(1);
  if (k < 1 || k > N) throw std::invalid_argument("select_queries: k out of range");
  auto s = scores.detach().to(torch::kFloat64).contiguous();
  std::vector<std::int64_t> all;
  for (std::int64_t b = 0; b < B; ++b) {
    std::vector<double> row(s[b].data_ptr<double>(), s[b].data_ptr<double>() + N);
    if (forced) {
      // Forced locations rank above any score in (0, 1).
      for (auto f : (*forced)[b]) row[f] = 2.0;
    }
    auto idx = select_top_k(row, k);
    all.insert(all.end(), idx.begin(), idx.end());
  }
  return torch::tensor(all, torch::kInt64).view({B, k});
}

Tensor DetectorImpl::box3d_from_raw(const Tensor& raw, const Tensor& boxes2d, const Tensor& intr) const {
  auto r = raw.clamp(-8, 8);
  auto b = cfg_.detach_boxes ? boxes2d.detach() : boxes2d;
  auto k = intr.unsqueeze(1);  // [B, 1, 4]
  auto u = (b.select(-1, 0) + r.select(-1, 0) * b.select(-1, 2)) * width_;
  auto v = (b.select(-1, 1) + r.select(-1, 1) * b.select(-1, 3)) * height_;
  auto depth = cfg_.depth_prior * torch::exp(r.select(-1, 2));
  auto x = (u - k.select(-1, 2)) / k.select(-1, 0) * depth;
  auto y = (v - k.select(-1, 3)) / k.select(-1, 1) * depth;
  auto size = cfg_.size_prior * torch::exp(r.narrow(-1, 3, 3));
  return torch::cat({torch::stack({x, y, depth}, -1), size}, -1);
}

DetectorOutput DetectorImpl::forward(const Tensor& images, const Tensor& intrinsics,
                                     const std::vector<std::vector<std::int64_t>>* forced) {
  DetectorOutput out;
  out.pyramid = encode_features(images);
  auto enc = enc_output_norm_(enc_output_(out.pyramid.memory));
  out.enc_logits = class_head_(enc);
  auto rois = rois_.to(enc.dtype());
  out.rois = rois;
  out.enc_boxes = torch::sigmoid(inverse_sigmoid(rois).unsqueeze(0) + enc_box_head_(enc));
  auto scores = torch::sigmoid(out.enc_logits).amax(-1);
  out.selected = select_queries(scores, cfg_.num_queries, forced);
  // Query content = encoder feature, position = preset ROI.
  auto idx = out.selected.to(images.device());
  auto content = torch::stack(
      [&] {
        std::vector<Tensor> rows;
        for (std::int64_t b = 0; b < enc.size(0); ++b) rows.push_back(enc[b].index_select(0, idx[b]));
        return rows;
      }(),
      0);
  out.content = content;  // replaced after decoding
  decode_detections(out, intrinsics);
  return out;
}

void DetectorImpl::decode_detections(DetectorOutput& out, const Tensor& intrinsics) {
  auto x = out.content;
  const auto B = x.size(0);
  std::vector<Tensor> rows;
  for (std::int64_t b = 0; b < B; ++b) rows.push_back(out.rois.index_select(0, out.selected[b]));
  auto ref = torch::stack(rows, 0);  // [B, k, 4]
  for (std::size_t l = 0; l < decoder_->size(); ++l) {
    auto pos = query_pos_(sine_embed(ref, cfg_.d_model / 8));
    x = decoder_[l]->as<DecoderLayer>()->forward(x, pos, ref.narrow(-1, 0, 2), out.pyramid);
    auto h = dec_norm_(x);
    DetLayerOutput lo;
    lo.logits = class_head_(h);
    lo.boxes2d = torch::sigmoid(inverse_sigmoid(ref) + box_head_(h));
    lo.boxes3d = box3d_from_raw(box3d_head_(h), lo.boxes2d, intrinsics);
    out.layers.push_back(lo);
    ref = cfg_.detach_boxes ? lo.boxes2d.detach() : lo.boxes2d;
    if (l + 1 == decoder_->size()) out.content = h;
  }
}

}  // namespace mixocc
