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
#include "training/trainer.hpp"

namespace mixocc {

/// Fresh model whose parameters depend only on `seed`.
OccupancyModel make_model(const Config& cfg, std::uint64_t seed);

struct DecodeTiming {
  QueryCounts counts;
  std::vector<double> ms;  // one entry per repetition
  double median_ms = 0;
};

struct DecodeBench {
  DecodeTiming mixed, dense;
  std::int64_t dense_voxels = 0;  // D * W * H
  double ratio = 0;               // mixed / dense median wall-clock
};

/// Background-only occupancy decoding of one synthetic scene with the
/// configured K schedule and with every child kept. Both runs share the
/// same weights and image features; repetitions alternate between them.
DecodeBench bench_decode(const Config& cfg, int reps, std::uint64_t seed);

struct ConvergenceOptions {
  int n_train = 500;
  int n_val = 50;
  std::uint64_t data_seed = 1000;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  int pretrain_epochs = 2;
  int main_epochs = 12;  // E_max of the run without pretraining
  double target_map = 0.5;
  bool quiet = true;
};

struct ConvergenceRun {
  std::uint64_t seed = 0;
  bool pretrain = false;
  std::vector<double> map;  // val mAP after every optimization epoch, pretraining included
  int epochs_to_target = -1;  // -1: not reached
};

struct ConvergenceResult {
  std::vector<ConvergenceRun> runs;
  double median_with = 0;     // epochs, pretraining included
  double median_without = 0;  // censored at main_epochs + 1 when not reached
  double ratio = 0;           // median_with / median_without
  bool with_all_reached = false;
};

/// Detector-only training with and without early-matching pretraining,
/// stopping each run once val mAP reaches the target.
ConvergenceResult convergence_study(Config cfg, const ConvergenceOptions& opt);

nlohmann::json to_json(const DecodeBench& b);
nlohmann::json to_json(const ConvergenceResult& r);

void write_decode_svg(const std::string& path, const DecodeBench& b);
void write_convergence_svg(const std::string& path, const ConvergenceResult& r, double target);

/// `bench` subcommand: decode comparison always, convergence study when
/// options contain "convergence": true. Writes report.txt, report.json and
/// the SVG plots into `out_dir`.
nlohmann::json run_bench(const Config& cfg, const std::string& out_dir, const nlohmann::json& opts);

}  // namespace mixocc
