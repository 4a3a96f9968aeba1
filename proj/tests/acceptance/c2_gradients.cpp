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

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "acceptance.hpp"
#include "detector/detector.hpp"
#include "occdecoder/occdecoder.hpp"
#include "semhead/semhead.hpp"
#include "synthdata/scene.hpp"
#include "training/bench.hpp"
#include "training/losses.hpp"
#include "training/model.hpp"

namespace acceptance {

using namespace mixocc;

namespace {

constexpr double kStep = 1e-5;
constexpr double kRtol = 1e-4;
// Floor for components whose true derivative is zero or nearly so, where a
// relative error is meaningless; central differences at this step resolve
// about 1e-10 in absolute terms on O(10) scalars.
constexpr double kAtol = 1e-7;

const auto kF64 = torch::TensorOptions().dtype(torch::kFloat64);

struct Checker {
  std::mt19937_64 rng{77};
  Tally tally;
  int elements = 0, groups = 0;
  double worst = 0;
  std::string worst_name;

  // Central differences of f on up to per_tensor random elements of every
  // tensor in xs (all elements when smaller).
  void run(const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor> xs, int per_tensor = 4) {
    ++groups;
    for (auto& x : xs) {
      if (!x.is_contiguous() || x.scalar_type() != torch::kFloat64) throw std::logic_error(name + ": bad input");
      if (!x.requires_grad()) x.requires_grad_(true);
    }
    auto loss = f();
    auto grads = torch::autograd::grad({loss}, xs, {}, false, false, true);
    torch::NoGradGuard ng;
    for (std::size_t t = 0; t < xs.size(); ++t) {
      auto& x = xs[t];
      const auto n = x.numel();
      std::vector<std::int64_t> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      if (n > per_tensor) {
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(per_tensor);
      }
      auto g = grads[t].defined() ? grads[t].contiguous() : torch::zeros_like(x);
      double* p = x.data_ptr<double>();
      for (auto i : idx) {
        const double orig = p[i];
        p[i] = orig + kStep;
        const double fp = f().item<double>();
        p[i] = orig - kStep;
        const double fm = f().item<double>();
        p[i] = orig;
        const double num = (fp - fm) / (2 * kStep);
        const double ana = g.data_ptr<double>()[i];
        const double err = std::abs(num - ana) / (kRtol * std::max(std::abs(num), std::abs(ana)) + kAtol);
        ++elements;
        if (err > worst) {
          worst = err;
          worst_name = name;
        }
        std::ostringstream os;
        os << name << " tensor " << t << " [" << i << "] analytic " << ana << " numeric " << num;
        tally.check(err <= 1.0, os.str());
      }
    }
  }
};

// Fixed random projection so any tensor output becomes a scalar.
struct Projector {
  Tensor r;
  Tensor operator()(const Tensor& out) {
    if (!r.defined()) r = torch::randn(out.sizes(), kF64);
    return (out * r).sum();
  }
};

template <class M>
std::vector<Tensor> jitter(M& module, double scale = 0.1) {
  module->to(torch::kFloat64);
  torch::NoGradGuard ng;
  for (auto& p : module->parameters()) p.add_(torch::randn(p.sizes(), kF64) * scale);
  return module->parameters();
}

Tensor leaf(Tensor t) { return t.to(torch::kFloat64).contiguous().detach().requires_grad_(true); }

Tensor boxes2d(std::int64_t n, double lo = 0.1) {
  auto c = torch::rand({n, 2}, kF64) * 0.6 + 0.2;
  auto s = torch::rand({n, 2}, kF64) * 0.3 + lo;
  return leaf(torch::cat({c, s}, 1));
}

void losses(Checker& ck) {
  auto logits = leaf(torch::randn({6, 5}) * 2);
  auto targets = (torch::rand({6, 5}) < 0.3).to(torch::kFloat64);
  ck.run("focal", [&] { return loss_focal(logits, targets, 0.25, 2.0); }, {logits}, 30);
  ck.run("focal alpha off gamma 0", [&] { return loss_focal(logits, targets, -1, 0.0); }, {logits}, 30);
  auto probs = leaf(torch::rand({40}) * 0.9 + 0.05);
  auto t40 = (torch::rand({40}) < 0.4).to(torch::kFloat64);
  ck.run("dice", [&] { return loss_dice(probs, t40); }, {probs}, 40);
  ck.run("bce", [&] { return loss_bce(probs, t40); }, {probs}, 40);
  auto lg = leaf(torch::randn({40}) * 3);
  ck.run("bce logits", [&] { return loss_bce_logits(lg, t40); }, {lg}, 40);

  auto a = boxes2d(8), b = boxes2d(8);
  ck.run("giou2d", [&] { return giou2d(a, b).sum(); }, {a, b}, 32);
  auto c = boxes2d(5);
  Projector pr;
  ck.run("giou2d pairwise", [&] { return pr(giou2d_pairwise(a, c)); }, {a, c}, 32);
  auto a3 = leaf(torch::cat({torch::randn({8, 3}), torch::rand({8, 3}) + 0.3}, 1));
  auto b3 = leaf(torch::cat({torch::randn({8, 3}) * 0.5, torch::rand({8, 3}) + 0.3}, 1));
  ck.run("giou3d", [&] { return giou3d(a3, b3).sum(); }, {a3, b3}, 48);

  // Detection terms on fixed matches, combined through the weighted total.
  LossWeights w;
  DetTargets tg;
  tg.classes = torch::tensor({1, 0, 3}, torch::kInt64);
  tg.boxes2d = boxes2d(3).detach();
  tg.boxes3d = torch::cat({torch::randn({3, 3}) + torch::tensor({0.0, 0.0, 10.0}, kF64), torch::rand({3, 3}, kF64) + 0.5}, 1);
  auto dl = leaf(torch::randn({1, 7, 5}));
  auto db = leaf(boxes2d(7).unsqueeze(0));
  auto d3 = leaf(torch::cat({torch::randn({1, 7, 3}) + torch::tensor({0.0, 0.0, 9.0}, kF64), torch::rand({1, 7, 3}, kF64) + 0.5}, 2));
  const Match m = hungarian_match(dl[0].detach(), db[0].detach(), tg, w);
  ck.run("detection terms", [&] {
    LossTerms terms;
    accumulate(terms, detection_terms(dl, db, d3, {tg}, {m}, w, 8.0));
    return total_loss(terms, w);
  }, {dl, db, d3}, 24);

  // total_loss in each of its named inputs.
  std::vector<std::string> names{"cls", "box2d", "giou2d", "box3d", "giou3d", "background", "foreground", "focal", "dice2"};
  std::vector<Tensor> vals;
  for (std::size_t i = 0; i < names.size(); ++i) vals.push_back(leaf(torch::rand({}) + 0.1));
  ck.run("total loss", [&] {
    LossTerms terms;
    for (std::size_t i = 0; i < names.size(); ++i) terms[names[i]] = vals[i];
    return total_loss(terms, w);
  }, vals, 1);
}

void layers(Checker& ck) {
  {
    MLP m(6, 12, 3, 3);
    auto ps = jitter(m);
    auto x = leaf(torch::randn({5, 6}));
    Projector pr;
    ps.push_back(x);
    ck.run("mlp", [&] { return pr(m(x)); }, ps);
  }
  {
    FFN m(8, 16);
    auto ps = jitter(m);
    auto x = leaf(torch::randn({2, 5, 8}));
    Projector pr;
    ps.push_back(x);
    ck.run("ffn", [&] { return pr(m(x)); }, ps);
  }
  {
    MultiHeadAttention m(8, 2);
    auto ps = jitter(m);
    auto q = leaf(torch::randn({2, 5, 8})), k = leaf(torch::randn({2, 7, 8})), v = leaf(torch::randn({2, 7, 8}));
    auto allowed = torch::rand({5, 7}) < 0.6;
    allowed.index_put_({torch::indexing::Slice(), 0}, true);
    Projector pr, pr2;
    auto all = ps;
    for (auto t : {q, k, v}) all.push_back(t);
    ck.run("multi-head attention", [&] { return pr(m(q, k, v)); }, all);
    ck.run("multi-head attention masked", [&] { return pr2(m(q, k, v, allowed)); }, all);
  }
  {
    const LevelShapes shapes{{6, 6}, {3, 3}};
    MSDeformAttn m(8, 2, 2, 3);
    auto ps = jitter(m);
    auto q = leaf(torch::randn({2, 4, 8}));
    auto ref = leaf(torch::rand({2, 4, 2}) * 0.8 + 0.1);
    auto val = leaf(torch::randn({2, 45, 8}));
    Projector pr;
    ps.push_back(q);
    ps.push_back(ref);
    ps.push_back(val);
    ck.run("deformable attention", [&] { return pr(m(q, ref, val, shapes)); }, ps);
  }
  {
    auto map = leaf(torch::randn({3, 5, 7}));
    auto xy = leaf(torch::rand({9, 2}) * 0.8 + 0.1);
    Projector pr;
    ck.run("bilinear sample", [&] { return pr(bilinear_sample(map, xy)); }, {map, xy}, 18);
  }
  {
    auto x = leaf(torch::rand({4, 3}));
    Projector pr, pr2;
    ck.run("sine embed", [&] { return pr(sine_embed(x, 4)); }, {x}, 12);
    ck.run("fourier embed", [&] { return pr2(fourier_embed(x, 4)); }, {x}, 12);
  }
}

void detector_parts(Checker& ck) {
  DetectorConfig dc;
  dc.d_model = 16;
  dc.n_heads = 2;
  dc.n_points = 2;
  dc.ffn_dim = 32;
  dc.backbone_channels = {8, 8, 16, 16};
  {
    Backbone m(dc.backbone_channels);
    auto ps = jitter(m);
    auto img = leaf(torch::rand({1, 3, 32, 32}));
    Projector pr;
    ps.push_back(img);
    ck.run("backbone", [&] {
      auto outs = m(img);
      return pr(torch::cat({outs[0].flatten(), outs[3].flatten()}));
    }, ps, 2);
  }
  const LevelShapes shapes{{4, 4}, {2, 2}, {1, 1}};
  {
    EncoderLayer m(dc);
    auto ps = jitter(m);
    auto x = leaf(torch::randn({1, 21, 16})), pos = leaf(torch::randn({1, 21, 16}) * 0.1);
    auto ref = leaf(torch::rand({1, 21, 2}) * 0.8 + 0.1);
    Projector pr;
    ps.push_back(x);
    ck.run("encoder layer", [&] { return pr(m(x, pos, ref, shapes)); }, ps, 2);
  }
  {
    DecoderLayer m(dc);
    auto ps = jitter(m);
    FeaturePyramid pyr;
    pyr.memory = leaf(torch::randn({1, 21, 16}));
    pyr.shapes = shapes;
    auto x = leaf(torch::randn({1, 5, 16})), pos = leaf(torch::randn({1, 5, 16}) * 0.1);
    auto ref = leaf(torch::rand({1, 5, 2}) * 0.8 + 0.1);
    Projector pr;
    ps.push_back(x);
    ps.push_back(pyr.memory);
    ck.run("decoder layer", [&] { return pr(m(x, pos, ref, pyr)); }, ps, 2);
  }
  {
    Config cfg;
    Detector det(cfg.detector, cfg.data.split.foreground.size(), cfg.data.image_width, cfg.data.image_height);
    det->to(torch::kFloat64);
    auto raw = leaf(torch::randn({1, 6, 6}) * 0.5);
    auto b2 = boxes2d(6).detach().unsqueeze(0);
    auto intr = intrinsics_tensor({cfg.data.camera()}, kF64);
    Projector pr;
    ck.run("3d box head", [&] { return pr(det->box3d_from_raw(raw, b2, intr)); }, {raw}, 36);
  }
}

void occupancy_parts(Checker& ck) {
  Config cfg;
  auto model = make_model(cfg, 21);
  auto ps = jitter(model, 0.02);
  model->eval();
  auto& occ = model->occ;
  const auto cam = cfg.data.camera();
  FeaturePyramid pyr;
  {
    torch::NoGradGuard ng;
    pyr = model->detector->encode_features(torch::rand({1, 3, cfg.data.image_height, cfg.data.image_width}, kF64)).image(0);
  }
  {
    auto boxes = leaf(torch::cat({torch::rand({5, 3}) * 4, torch::rand({5, 3}) * 4 + 5}, 1));
    Projector pr;
    ck.run("box encoding", [&] { return pr(occ->encode_box3d(boxes)); }, {boxes}, 30);
  }
  {
    auto x = leaf(torch::randn({6, cfg.detector.d_model}));
    Projector pr;
    ck.run("occupancy head", [&] { return pr(occ->occupancy_logits(1, x)); }, {x}, 12);
  }
  {
    OccLayer m(16, 2, 2, 3, 32);
    auto lps = jitter(m);
    FeaturePyramid p2;
    p2.memory = leaf(torch::randn({1, 21, 16}));
    p2.shapes = {{4, 4}, {2, 2}, {1, 1}};
    auto x = leaf(torch::randn({7, 16})), pos = leaf(torch::randn({7, 16}) * 0.1);
    auto ref = leaf(torch::rand({7, 2}) * 0.8 + 0.1);
    auto valid = torch::tensor({1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0}, kF64);
    auto allowed = torch::ones({7, 7}, torch::kBool);
    allowed.index_put_({torch::indexing::Slice(0, 3), torch::indexing::Slice(3, 7)}, false);
    Projector pr;
    lps.push_back(x);
    lps.push_back(p2.memory);
    ck.run("occupancy layer", [&] { return pr(m(x, pos, ref, valid, p2, allowed)); }, lps, 2);
  }
  {
    // Full mixed decode: foreground logits and background logits back to the
    // seed contents and the decoder weights.
    const auto C = cfg.detector.d_model;
    auto s0 = leaf(torch::randn({C})), s1 = leaf(torch::randn({C}));
    const std::vector<Box3D> boxes{Box3D::from_corners({3.0, 6.0, 0.0}, {6.2, 8.1, 1.7}, Frame::grid),
                                   Box3D::from_corners({6.5, 9.0, 0.2}, {9.0, 11.5, 2.9}, Frame::grid)};
    Projector pf, pb;
    auto f = [&] {
      auto o = occ->forward({{s0, boxes[0]}, {s1, boxes[1]}}, pyr, cam);
      return pf(o.fg_logits) + pb(o.bg_logits);
    };
    std::vector<Tensor> xs{s0, s1};
    ck.run("occupancy decoder to seed content", f, xs, 16);
    std::vector<Tensor> sub;
    for (auto& p : occ->parameters()) sub.push_back(p);
    ck.run("occupancy decoder weights", f, sub, 1);
  }
  {
    MaskFormer m(9, 16, 2, 32, 2);
    auto mps = jitter(m);
    auto feat = leaf(torch::randn({12, 16}));
    Projector pr;
    mps.push_back(feat);
    ck.run("maskformer head", [&] { return pr(m(feat)); }, mps, 2);
  }
}

// Whole model in the main phase with occupancy: every term of the total loss
// back to a sample of all parameters.
void end_to_end(Checker& ck) {
  Config cfg;
  // Stop-gradients on refined boxes are a training choice; without them the
  // autograd result must be the derivative of the computed loss.
  cfg.detector.detach_boxes = false;
  auto scene = prepare_scene(generate_scene(cfg.data, 3), cfg);
  auto model = make_model(cfg, 4);
  auto ps = jitter(model, 0.01);
  model->eval();
  const std::vector<const PreparedScene*> batch{&scene};
  auto f = [&] { return total_loss(model->compute_losses(batch, Phase::main, true), cfg.training.loss); };
  auto fp = [&] { return total_loss(model->compute_losses(batch, Phase::pretrain, false), cfg.training.loss); };
  std::vector<Tensor> sample;
  std::shuffle(ps.begin(), ps.end(), ck.rng);
  for (std::size_t i = 0; i < ps.size() && sample.size() < 60; ++i) sample.push_back(ps[i]);
  ck.run("full model, main phase", f, sample, 1);
  sample.assign(ps.begin(), ps.begin() + std::min<std::size_t>(ps.size(), 30));
  ck.run("full model, pretraining", fp, sample, 1);
}

}  // namespace

Outcome c2_gradients() {
  Stopwatch sw;
  torch::manual_seed(99);
  Checker ck;
  losses(ck);
  layers(ck);
  detector_parts(ck);
  occupancy_parts(ck);
  end_to_end(ck);
  const double secs = sw.seconds();
  ck.tally.check(secs < 300, "runtime over 5 min");
  std::ostringstream os;
  os << "gradient suite: " << ck.groups << " functions, " << ck.elements << " elements, worst error " << ck.worst
     << " of tolerance (" << ck.worst_name << ")";
  if (!ck.tally.ok()) os << "; " << ck.tally.failed() << " failed: " << ck.tally.failures();
  return {ck.tally.ok(), os.str()};
}

}  // namespace acceptance
