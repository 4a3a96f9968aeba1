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


#include "training/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "synthdata/dataset_io.hpp"

namespace mixocc {

namespace fs = std::filesystem;
using nlohmann::json;

Dataset synth_dataset(const Config& cfg, int n_train, int n_val, std::uint64_t seed) {
  Dataset d;
  for (int i = 0; i < n_train; ++i) d.train.push_back(prepare_scene(generate_scene(cfg.data, seed + i), cfg));
  for (int i = 0; i < n_val; ++i) d.val.push_back(prepare_scene(generate_scene(cfg.data, seed + n_train + i), cfg));
  return d;
}

int write_synth_dataset(const std::string& root, const Config& cfg, int n_train, int n_val, std::uint64_t seed) {
  DatasetMeta meta = meta_from_config(cfg.data);
  meta.splits = {"train", "val"};
  fs::create_directories(root);
  write_dataset_meta(root, meta);
  int failures = 0;
  std::uint64_t s = seed;
  for (const auto& [split, n] : {std::pair<std::string, int>{"train", n_train}, {"val", n_val}}) {
    const auto dir = (fs::path(root) / split).string();
    fs::create_directories(dir);
    for (int i = 0; i < n; ++i) {
      const auto scene = generate_scene(cfg.data, s++);
      failures += scene.placement_failed;
      write_scene(dir, i, scene);
    }
  }
  return failures;
}

Dataset load_dataset(const std::string& root, const Config& cfg) {
  const auto meta = read_dataset_meta(root);
  if (!(meta.grid == cfg.data.grid) || meta.image_width != cfg.data.image_width ||
      meta.image_height != cfg.data.image_height || std::abs(meta.voxel_size - cfg.data.voxel_size) > 1e-12)
    throw std::invalid_argument("dataset geometry does not match the config");
  Dataset d;
  for (const auto& [split, out] : {std::pair<std::string, std::vector<PreparedScene>*>{"train", &d.train}, {"val", &d.val}}) {
    const auto dir = (fs::path(root) / split).string();
    const int n = count_scenes(dir);
    for (int i = 0; i < n; ++i) out->push_back(prepare_scene(read_scene(dir, i, meta), cfg));
  }
  if (d.train.empty()) throw std::invalid_argument("dataset has no training scenes: " + root);
  return d;
}

EvalResult evaluate(OccupancyModel& model, const std::vector<PreparedScene>& scenes, bool occupancy, int batch) {
  const auto& cfg = model->config();
  EvalResult r;
  r.scenes = static_cast<int>(scenes.size());
  std::vector<ScoredBox> dets, gts;
  MiouAccumulator acc(cls::kNumSemantic + 1), maj(cls::kNumSemantic + 1);
  std::vector<VoxelGrid> grids;
  for (const auto& s : scenes) grids.push_back(s.gt);
  r.majority_class = majority_class(grids);
  for (std::size_t i = 0; i < scenes.size(); i += batch) {
    const std::size_t n = std::min<std::size_t>(batch, scenes.size() - i);
    std::vector<Tensor> imgs;
    std::vector<CameraModel> cams;
    for (std::size_t j = 0; j < n; ++j) {
      imgs.push_back(scenes[i + j].image);
      cams.push_back(scenes[i + j].camera);
    }
    const auto preds = model->predict(torch::stack(imgs), cams, occupancy);
    for (std::size_t j = 0; j < n; ++j) {
      const int img = static_cast<int>(i + j);
      for (auto b : preds[j].scored) {
        b.image = img;
        dets.push_back(b);
      }
      for (const auto& g : gt_boxes(scenes[i + j], cfg.data.split, img)) gts.push_back(g);
      if (occupancy) {
        acc.add(preds[j].scene.grid.labels, scenes[i + j].gt.labels);
        maj.add(majority_prediction(scenes[i + j].gt, r.majority_class), scenes[i + j].gt.labels);
        r.counts.bg_processed += preds[j].counts.bg_processed;
        r.counts.fg_processed += preds[j].counts.fg_processed;
        r.counts.children_scored += preds[j].counts.children_scored;
      }
    }
  }
  r.map = metric_map(dets, gts, cfg.num_fg(), cfg.training.map_iou).map;
  if (occupancy) {
    r.miou = acc.result();
    r.majority = maj.result();
  }
  return r;
}

double linear_lr(double lr0, std::int64_t step, std::int64_t total) {
  if (total <= 0) return lr0;
  if (step >= total) return 0.0;
  return lr0 * (1.0 - static_cast<double>(step) / static_cast<double>(total));
}

Trainer::Trainer(const Config& cfg, OccupancyModel model) : cfg_(cfg), model_(std::move(model)) {}

std::int64_t Trainer::steps_per_epoch(std::size_t n) const {
  const auto b = static_cast<std::size_t>(cfg_.training.batch_size);
  return static_cast<std::int64_t>((n + b - 1) / b);
}

void Trainer::make_optimizer(Phase phase) {
  params_.clear();
  if (phase == Phase::pretrain) {
    std::vector<Tensor> frozen;
    if (cfg_.detector.freeze_encoder_pretrain) frozen = model_->detector->encoder_parameters();
    for (auto& p : model_->detector_parameters()) {
      bool skip = false;
      for (auto& f : frozen) skip |= f.is_same(p);
      if (!skip) params_.push_back(p);
    }
  } else {
    params_ = cfg_.training.freeze_detector ? model_->occupancy_parameters() : model_->parameters();
  }
  const double lr = phase == Phase::pretrain ? cfg_.training.pretrain_lr : cfg_.training.lr;
  opt_ = std::make_unique<torch::optim::AdamW>(params_,
                                               torch::optim::AdamWOptions(lr).weight_decay(cfg_.training.weight_decay));
}

std::vector<int> Trainer::epoch_order(std::size_t n, int epoch) const {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(cfg_.training.seed * 1000003ULL + static_cast<std::uint64_t>(epoch) * 7919ULL +
                      (state_.phase == Phase::main ? 1ULL : 0ULL));
  for (int i = static_cast<int>(n) - 1; i > 0; --i) std::swap(idx[i], idx[uniform_int(rng, 0, i)]);
  return idx;
}

double Trainer::step(const std::vector<const PreparedScene*>& batch, Phase phase, LossTerms* out_terms) {
  const bool occupancy = phase == Phase::main && cfg_.training.train_occupancy;
  auto terms = model_->compute_losses(batch, phase, occupancy);
  auto total = total_loss(terms, cfg_.training.loss);
  const double v = total.item<double>();
  if (!std::isfinite(v)) {
    json dump{{"phase", phase_name(phase)}, {"epoch", state_.epoch}, {"step", state_.step},
              {"batch", current_batch_}};
    for (const auto& [k, t] : terms) dump["terms"][k] = t.item<double>();
    throw TrainingError("non-finite loss at step " + std::to_string(state_.step) + ": " + dump.dump());
  }
  const double lr = linear_lr(phase == Phase::pretrain ? cfg_.training.pretrain_lr : cfg_.training.lr, state_.step,
                              total_steps_);
  for (auto& g : opt_->param_groups()) static_cast<torch::optim::AdamWOptions&>(g.options()).lr(lr);
  opt_->zero_grad();
  total.backward();
  if (cfg_.training.grad_clip > 0) torch::nn::utils::clip_grad_norm_(params_, cfg_.training.grad_clip);
  opt_->step();
  ++state_.step;
  if (out_terms) *out_terms = terms;
  return v;
}

std::vector<json> Trainer::run(Phase phase, const Dataset& data, const TrainOptions& opt) {
  if (data.train.empty()) throw std::invalid_argument("run: empty training set");
  const int epochs = phase == Phase::pretrain ? cfg_.training.pretrain_epochs : cfg_.training.epochs;
  if (state_.phase != phase) {
    state_ = TrainState{phase, 0, 0};
    make_optimizer(phase);
  } else if (!opt_) {
    make_optimizer(phase);
  }
  const auto spe = steps_per_epoch(data.train.size());
  total_steps_ = spe * epochs;
  std::vector<json> records;
  if (!opt.out_dir.empty()) fs::create_directories(opt.out_dir);
  const bool occupancy = phase == Phase::main && cfg_.training.train_occupancy;

  while (state_.epoch < epochs) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::int64_t calls0 = hungarian_calls();
    const auto order = epoch_order(data.train.size(), state_.epoch);
    std::map<std::string, double> sums;
    double total_sum = 0;
    std::int64_t n_steps = 0;
    bool stop = false;
    for (std::size_t i = 0; i < order.size(); i += cfg_.training.batch_size) {
      std::vector<const PreparedScene*> batch;
      current_batch_.clear();
      for (std::size_t j = i; j < std::min(order.size(), i + cfg_.training.batch_size); ++j) {
        batch.push_back(&data.train[order[j]]);
        current_batch_.push_back(order[j]);
      }
      LossTerms terms;
      try {
        total_sum += step(batch, phase, &terms);
      } catch (const TrainingError& e) {
        if (!opt.out_dir.empty()) {
          std::ofstream(fs::path(opt.out_dir) / "nonfinite_dump.json") << e.what() << "\n";
          save_checkpoint((fs::path(opt.out_dir) / "nonfinite").string());
        }
        throw;
      }
      for (const auto& [k, t] : terms) sums[k] += t.item<double>();
      ++n_steps;
      if (opt.max_steps >= 0 && state_.step >= opt.max_steps) {
        stop = true;
        break;
      }
    }
    ++state_.epoch;
    json rec{{"phase", phase_name(phase)}, {"epoch", state_.epoch}, {"step", state_.step},
             {"lr", linear_lr(phase == Phase::pretrain ? cfg_.training.pretrain_lr : cfg_.training.lr, state_.step,
                              total_steps_)},
             {"loss", total_sum / std::max<std::int64_t>(1, n_steps)},
             {"hungarian_calls", hungarian_calls() - calls0}};
    for (const auto& [k, v] : sums) rec["terms"][k] = v / std::max<std::int64_t>(1, n_steps);
    if (!data.val.empty()) {
      const auto ev = evaluate(model_, data.val, occupancy && opt.eval_occupancy);
      rec["map"] = ev.map;
      if (occupancy && opt.eval_occupancy) {
        rec["miou"] = ev.miou.miou;
        rec["majority_miou"] = ev.majority.miou;
      }
    }
    if (!opt.out_dir.empty()) {
      std::ofstream(fs::path(opt.out_dir) / "log.jsonl", std::ios::app) << rec.dump() << "\n";
      save_checkpoint((fs::path(opt.out_dir) / (std::string(phase_name(phase)) + "_epoch" +
                                                std::to_string(state_.epoch)))
                          .string());
    }
    if (!opt.quiet) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cerr << rec.dump() << " (" << secs << " s)\n";
    }
    if (opt.on_record) opt.on_record(rec);
    records.push_back(rec);
    if (stop) break;
    if (opt.stop_map >= 0 && rec.contains("map") && rec["map"].get<double>() >= opt.stop_map) break;
  }
  return records;
}

void Trainer::save_checkpoint(const std::string& prefix) const {
  auto m = model_;
  torch::save(m, prefix + ".model");
  if (opt_) torch::save(*opt_, prefix + ".optim");
  json s{{"phase", phase_name(state_.phase)}, {"epoch", state_.epoch}, {"step", state_.step},
         {"config", cfg_}};
  std::ofstream(prefix + ".json") << s.dump(2) << "\n";
}

void Trainer::load_checkpoint(const std::string& prefix) {
  std::ifstream in(prefix + ".json");
  if (!in) throw std::invalid_argument("no checkpoint at " + prefix);
  json s = json::parse(in);
  torch::load(model_, prefix + ".model");
  state_.phase = s.at("phase").get<std::string>() == "pretrain" ? Phase::pretrain : Phase::main;
  state_.epoch = s.at("epoch").get<int>();
  state_.step = s.at("step").get<std::int64_t>();
  make_optimizer(state_.phase);
  if (fs::exists(prefix + ".optim")) torch::load(*opt_, prefix + ".optim");
}

void save_model(const std::string& path, OccupancyModel& model) { torch::save(model, path); }
void load_model(const std::string& path, OccupancyModel& model) { torch::load(model, path); }

}  // namespace mixocc
