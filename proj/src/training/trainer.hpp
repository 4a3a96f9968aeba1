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

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "training/model.hpp"

namespace mixocc {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  std::vector<PreparedScene> train;
  std::vector<PreparedScene> val;
};

/// Scenes generated in memory: train seeds seed..seed+n_train-1, val seeds follow.
Dataset synth_dataset(const Config& cfg, int n_train, int n_val, std::uint64_t seed);
/// Reads <root>/train and <root>/val written by `gen-data`.
Dataset load_dataset(const std::string& root, const Config& cfg);
/// Generates and writes a dataset; returns the number of placement failures.
int write_synth_dataset(const std::string& root, const Config& cfg, int n_train, int n_val, std::uint64_t seed);

struct EvalResult {
  double map = 0;
  MiouResult miou;
  MiouResult majority;
  Label majority_class = kFree;
  int scenes = 0;
  QueryCounts counts;  // summed over scenes
};

/// mAP on every scene; with `occupancy` also mIoU of the assembled grids
/// and the majority-class baseline computed on the same scenes.
EvalResult evaluate(OccupancyModel& model, const std::vector<PreparedScene>& scenes, bool occupancy,
                    int batch = 8);

double linear_lr(double lr0, std::int64_t step, std::int64_t total);

struct TrainOptions {
  std::string out_dir;          // empty: no log or checkpoints on disk
  bool eval_occupancy = true;   // compute mIoU after main-phase epochs
  double stop_map = -1;         // stop a phase once val mAP reaches this (ignored when < 0)
  std::int64_t max_steps = -1;  // stop a phase after this many steps (testing)
  bool quiet = false;
  std::function<void(const nlohmann::json&)> on_record;
};

struct TrainState {
  Phase phase = Phase::pretrain;
  int epoch = 0;           // completed epochs in `phase`
  std::int64_t step = 0;   // optimizer steps in `phase`
};

class Trainer {
 public:
  Trainer(const Config& cfg, OccupancyModel model);

  /// Trains `phase` from the current state to the configured epoch count.
  /// Returns the per-epoch records (also appended to <out_dir>/log.jsonl).
  std::vector<nlohmann::json> run(Phase phase, const Dataset& data, const TrainOptions& opt);

  /// One optimizer step on `batch`; returns the weighted loss.
  double step(const std::vector<const PreparedScene*>& batch, Phase phase, LossTerms* terms = nullptr);

  void save_checkpoint(const std::string& prefix) const;
  void load_checkpoint(const std::string& prefix);

  const TrainState& state() const { return state_; }
  OccupancyModel& model() { return model_; }
  std::int64_t steps_per_epoch(std::size_t n) const;

 private:
  void make_optimizer(Phase phase);
  std::vector<int> epoch_order(std::size_t n, int epoch) const;

  Config cfg_;
  OccupancyModel model_;
  TrainState state_;
  std::unique_ptr<torch::optim::AdamW> opt_;
  std::vector<Tensor> params_;
  std::int64_t total_steps_ = 0;
  std::vector<int> current_batch_;
};

/// Shared weights-only file (no optimizer state).
void save_model(const std::string& path, OccupancyModel& model);
void load_model(const std::string& path, OccupancyModel& model);

}  // namespace mixocc
