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


// Command-line front end. Talks to the library only through mixocc.h.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "mixocc/mixocc.h"

namespace {

struct ApiError {
  mixocc_status status;
  std::string message;
};

void check(mixocc_status s) {
  if (s != MIXOCC_OK) throw ApiError{s, mixocc_last_error()};
}

// Takes ownership of a string returned by the library.
std::string take(char* s) {
  std::string out = s ? s : "";
  mixocc_free_string(s);
  return out;
}

const char* opt_cstr(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

using ModelPtr = std::unique_ptr<mixocc_model, decltype(&mixocc_model_free)>;
using DataPtr = std::unique_ptr<mixocc_dataset, decltype(&mixocc_dataset_free)>;

struct DataArgs {
  std::string root;
  int synth_train = 0;
  int synth_val = 50;
  std::uint64_t data_seed = 1000;

  void add(CLI::App* app) {
    app->add_option("--data", root, "dataset root written by gen-data");
    app->add_option("--synth-train", synth_train, "generate this many training scenes in memory instead");
    app->add_option("--synth-val", synth_val, "validation scenes generated with --synth-train");
    app->add_option("--data-seed", data_seed, "first scene seed for --synth-train");
  }
  DataPtr open(const std::string& config) const {
    mixocc_dataset* d = nullptr;
    if (!root.empty()) {
      check(mixocc_dataset_open(opt_cstr(config), root.c_str(), &d));
    } else if (synth_train > 0) {
      check(mixocc_dataset_synth(opt_cstr(config), synth_train, synth_val, data_seed, &d));
    } else {
      throw CLI::ValidationError("dataset", "give --data or --synth-train");
    }
    return DataPtr(d, mixocc_dataset_free);
  }
};

ModelPtr make_model(const std::string& config, std::uint64_t seed, const std::string& weights) {
  mixocc_model* m = nullptr;
  check(mixocc_model_create(opt_cstr(config), seed, &m));
  ModelPtr p(m, mixocc_model_free);
  if (!weights.empty()) check(mixocc_model_load_weights(p.get(), weights.c_str()));
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixed dense-sparse semantic occupancy toolkit"};
  app.require_subcommand(1);
  std::string config;
  int threads = 1;
  app.add_option("-c,--config", config, "JSON config file (defaults when omitted)");
  app.add_option("--threads", threads, "tensor library threads")->check(CLI::PositiveNumber);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  std::string gen_out;
  int gen_train = 500, gen_val = 50;
  std::uint64_t gen_seed = 1000;
  gen->add_option("-o,--out", gen_out, "output root")->required();
  gen->add_option("--train", gen_train, "training scenes");
  gen->add_option("--val", gen_val, "validation scenes");
  gen->add_option("--seed", gen_seed, "seed of the first scene");

  // pretrain / train share most options.
  struct TrainArgs {
    DataArgs data;
    std::string out, weights, resume, save;
    std::uint64_t seed = 0;
  };
  TrainArgs pre_args, train_args;
  auto add_train = [](CLI::App* sub, TrainArgs& a, const char* default_save) {
    a.data.add(sub);
    a.save = default_save;
    sub->add_option("-o,--out", a.out, "directory for log.jsonl and per-epoch checkpoints")->required();
    sub->add_option("-w,--weights", a.weights, "initial weights");
    sub->add_option("--resume", a.resume, "checkpoint prefix to continue from, e.g. out/main_epoch3");
    sub->add_option("--save", a.save, "final weights file name inside --out");
    sub->add_option("--seed", a.seed, "parameter initialization seed");
  };
  auto* pre = app.add_subcommand("pretrain", "early-matching detector pretraining");
  add_train(pre, pre_args, "pretrain.weights");
  auto* train = app.add_subcommand("train", "main end-to-end training");
  add_train(train, train_args, "model.weights");

  // eval
  auto* ev = app.add_subcommand("eval", "mAP and mIoU on a split");
  DataArgs ev_data;
  std::string ev_weights, ev_split = "val";
  bool ev_det_only = false;
  ev_data.add(ev);
  ev->add_option("-w,--weights", ev_weights, "model weights")->required();
  ev->add_option("--split", ev_split, "train or val")->check(CLI::IsMember({"train", "val"}));
  ev->add_flag("--detection-only", ev_det_only, "skip occupancy decoding");

  // infer
  auto* inf = app.add_subcommand("infer", "predict one image");
  std::string inf_weights, inf_image, inf_camera, inf_labels;
  inf->add_option("-w,--weights", inf_weights, "model weights")->required();
  inf->add_option("--image", inf_image, "PNG image")->required()->check(CLI::ExistingFile);
  inf->add_option("--camera", inf_camera, ".camera file")->required()->check(CLI::ExistingFile);
  inf->add_option("--labels-out", inf_labels, "write the predicted label volume here");

  // bench
  auto* bench = app.add_subcommand("bench", "dense vs mixed decoding and the pretraining convergence study");
  std::string bench_out, bench_opts;
  bool bench_conv = false;
  int bench_reps = 5;
  bench->add_option("-o,--out", bench_out, "report directory")->required();
  bench->add_option("--reps", bench_reps, "timed repetitions per mode");
  bench->add_flag("--convergence", bench_conv, "also run the convergence study (long)");
  bench->add_option("--options", bench_opts, "extra options as a JSON object (overrides flags)");

  // config
  auto* cfg_cmd = app.add_subcommand("config", "print the effective configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    check(mixocc_set_threads(threads));
    if (*gen) {
      int failures = 0;
      check(mixocc_generate_dataset(opt_cstr(config), gen_out.c_str(), gen_train, gen_val, gen_seed, &failures));
      std::cout << "wrote " << gen_train << " train / " << gen_val << " val scenes to " << gen_out
                << " (placement failures: " << failures << ")\n";
    } else if (*pre || *train) {
      auto& a = *pre ? pre_args : train_args;
      auto data = a.data.open(config);
      auto model = make_model(config, a.seed, a.weights);
      char* recs = nullptr;
      check(mixocc_train(model.get(), data.get(), *pre ? 0 : 1, a.out.c_str(), opt_cstr(a.resume), &recs));
      take(recs);
      const std::string path = a.out + "/" + a.save;
      check(mixocc_model_save_weights(model.get(), path.c_str()));
      std::cout << "weights: " << path << "\nlog: " << a.out << "/log.jsonl\n";
    } else if (*ev) {
      auto data = ev_data.open(config);
      auto model = make_model(config, 0, ev_weights);
      char* out = nullptr;
      check(mixocc_evaluate(model.get(), data.get(), ev_split == "train" ? 0 : 1, ev_det_only ? 0 : 1, &out));
      std::cout << take(out) << "\n";
    } else if (*inf) {
      auto model = make_model(config, 0, inf_weights);
      char* out = nullptr;
      check(mixocc_infer(model.get(), inf_image.c_str(), inf_camera.c_str(), opt_cstr(inf_labels), &out));
      std::cout << take(out) << "\n";
    } else if (*bench) {
      std::string opts = bench_opts;
      if (opts.empty()) {
        opts = "{\"reps\": " + std::to_string(bench_reps) + ", \"convergence\": " + (bench_conv ? "true" : "false") +
               ", \"quiet\": false}";
      }
      char* out = nullptr;
      check(mixocc_bench(opt_cstr(config), bench_out.c_str(), opts.c_str(), &out));
      take(out);
      std::FILE* f = std::fopen((bench_out + "/report.txt").c_str(), "r");
      if (f) {
        char buf[4096];
        std::size_t n;
        while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) std::fwrite(buf, 1, n, stdout);
        std::fclose(f);
      }
    } else if (*cfg_cmd) {
      char* out = nullptr;
      check(mixocc_config_json(opt_cstr(config), &out));
      std::cout << take(out) << "\n";
    }
  } catch (const ApiError& e) {
    std::cerr << "error (" << mixocc_status_name(e.status) << "): " << e.message << "\n";
    return 1 + static_cast<int>(e.status);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  }
  return 0;
}
