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


#include "mixocc/mixocc.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "synthdata/dataset_io.hpp"
#include "training/bench.hpp"
#include "training/trainer.hpp"

using nlohmann::json;
using namespace mixocc;

struct mixocc_model {
  Config cfg;
  OccupancyModel model{nullptr};
  std::unique_ptr<Trainer> trainer;
};

struct mixocc_dataset {
  Config cfg;
  Dataset data;
};

namespace {

thread_local std::string g_error;

mixocc_status fail(mixocc_status s, const std::string& msg) {
  g_error = msg;
  return s;
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

Config config_from(const char* path) { return path && *path ? load_config(path) : Config{}; }

// Maps exceptions to status codes at the API boundary.
template <class Fn>
mixocc_status guarded(Fn&& fn) {
  g_error.clear();
  try {
    fn();
    return MIXOCC_OK;
  } catch (const TrainingError& e) {
    return fail(MIXOCC_ERR_NONFINITE, e.what());
  } catch (const IoError& e) {
    return fail(MIXOCC_ERR_IO, e.what());
  } catch (const GeometryError& e) {
    return fail(MIXOCC_ERR_GEOMETRY, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(MIXOCC_ERR_CONFIG, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(MIXOCC_ERR_INVALID_ARGUMENT, e.what());
  } catch (const c10::Error& e) {
    return fail(MIXOCC_ERR_INTERNAL, e.what_without_backtrace());
  } catch (const std::exception& e) {
    return fail(MIXOCC_ERR_INTERNAL, e.what());
  }
}

json miou_json(const MiouResult& r) {
  json per = json::object();
  for (std::size_t c = 1; c < r.iou.size(); ++c) {
    if (!std::isnan(r.iou[c])) per[class_name(static_cast<Label>(c))] = r.iou[c];
  }
  return {{"miou", std::isnan(r.miou) ? json(nullptr) : json(r.miou)}, {"classes", r.count}, {"per_class", per}};
}

}  // namespace

extern "C" {

const char* mixocc_last_error(void) { return g_error.c_str(); }

const char* mixocc_status_name(mixocc_status s) {
  switch (s) {
    case MIXOCC_OK: return "ok";
    case MIXOCC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case MIXOCC_ERR_IO: return "i/o error";
    case MIXOCC_ERR_CONFIG: return "config error";
    case MIXOCC_ERR_NONFINITE: return "non-finite loss";
    case MIXOCC_ERR_GEOMETRY: return "geometry error";
    case MIXOCC_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

const char* mixocc_version(void) { return "0.1.0"; }

void mixocc_free_string(char* s) { std::free(s); }

mixocc_status mixocc_set_threads(int n) {
  if (n < 1) return fail(MIXOCC_ERR_INVALID_ARGUMENT, "threads must be >= 1");
  return guarded([&] { torch::set_num_threads(n); });
}

mixocc_status mixocc_config_json(const char* config_path, char** out_json) {
  if (!out_json) return fail(MIXOCC_ERR_INVALID_ARGUMENT, "out_json is null");
  return guarded([&] { *out_json = dup(json(config_from(config_path)).dump(2)); });
}

mixocc_status mixocc_generate_dataset(const char* config_path, const char* root, int n_train, int n_val, uint64_t seed,
                                      int* placement_failures) {
  if (!root || n_train < 1 || n_val < 0) return fail(MIXOCC_ERR_INVALID_ARGUMENT, "need a root and n_train >= 1");
  return guarded([&] {
    const int f = write_synth_dataset(root, config_from(config_path), n_train, n_val, seed);
    if (placement_failures) *placement_failures = f;
  });
}

mixocc_status mixocc_dataset_open(const char* config_path, const char* root, mixocc_dataset** out) {
  if (!root || !out) return fail(MIXOCC_ERR_INVALID_ARGUMENT, "root and out must be non-null");
  return guarded([&] {
    auto d = std::make_unique<mixocc_dataset>();
    d->cfg = config_from(config_path);
    d->data = load_dataset(root, d->cfg);
    *out = d.release();
  });
}

mixocc_status mixocc_dataset_synth(const char* config_path, int n_train, int n_val, uint64_t seed,
                                   mixocc_dataset** out) {
  if (!out || n_train < 1 || n_val < 0) return fail(MIXOCC_ERR_INVALID_ARGUMENT, "need out and n_train >= 1");
  return guarded([&] {
    auto d = std::make_unique<mixocc_dataset>();
    d->cfg = config_from(config_path);
    d->data = synth_dataset(d->cfg, n_train, n_val, seed);
    *out = d.release();
  });
}

mixocc_status mixocc_dataset_size(const mixocc_dataset* d, int* n_train, int* n_val) {
  if (!d) return fail(MIXOCC_ERR_INVALID_ARGUMENT, "dataset is null");
  if (n_train) *n_train = static_cast<int>(d->data.train.size());
  if (n_val) *n_val = static_cast<int>(d->data.val.size());
  return MIXOCC_OK;
}

void mixocc_dataset_free(mixocc_dataset* d) { delete d; }

mixocc_status mixocc_model_create(const char* config_path, uint64_t seed, mixocc_model** out) {
  if (!out) return fail(MIXOCC_ERR_INVALID_ARGUMENT, "out is null");
  return guarded([&] {
    auto m = std::make_unique<mixocc_model>();
    m->cfg = config_from(config_path);
    m->model = make_model(m->cfg, seed);
    *out = m.release();
  });
}

mixocc_status mixocc_model_load_weights(mixocc_model* m, const char* path) {
  if (!m || !path) return fail(MIXOCC_ERR_INVALID_ARGUMENT, "model and path must be non-null");
  if (!std::filesystem::exists(path)) return fail(MIXOCC_ERR_IO, std::string("no such file: ") + path);
  return guarded([&] { load_model(path, m->model); });
}

mixocc_status mixocc_model_save_weights(mixocc_model* m, const char* path) {
  if (!m || !path) return fail(MIXOCC_ERR_INVALID_ARGUMENT, "model and path must be non-null");
  return guarded([&] { save_model(path, m->model); });
}

void mixocc_model_free(mixocc_model* m) { delete m; }

mixocc_status mixocc_train(mixocc_model* m, const mixocc_dataset* d, int phase, const char* out_dir,
                           const char* resume_prefix, char** records_json) {
  if (!m || !d) return fail(MIXOCC_ERR_INVALID_ARGUMENT, "model and dataset must be non-null");
  if (phase != 0 && phase != 1) return fail(MIXOCC_ERR_INVALID_ARGUMENT, "phase must be 0 or 1");
  return guarded([&] {
    if (!m->trainer) m->trainer = std::make_unique<Trainer>(m->cfg, m->model);
    if (resume_prefix && *resume_prefix) m->trainer->load_checkpoint(resume_prefix);
    TrainOptions opt;
    opt.out_dir = out_dir ? out_dir : "";
    const auto recs = m->trainer->run(phase == 0 ? Phase::pretrain : Phase::main, d->data, opt);
    if (records_json) *records_json = dup(json(recs).dump());
  });
}

mixocc_status mixocc_evaluate(mixocc_model* m, const mixocc_dataset* d, int split, int occupancy, char** result_json) {
  if (!m || !d || !result_json) return fail(MIXOCC_ERR_INVALID_ARGUMENT, "null argument");
  if (split != 0 && split != 1) return fail(MIXOCC_ERR_INVALID_ARGUMENT, "split must be 0 or 1");
  return guarded([&] {
    const auto& scenes = split == 0 ? d->data.train : d->data.val;
    if (scenes.empty()) throw std::invalid_argument("split is empty");
    const auto r = evaluate(m->model, scenes, occupancy != 0);
    json j{{"scenes", r.scenes}, {"map", r.map}};
    if (occupancy) {
      j["miou"] = miou_json(r.miou);
      j["majority_baseline"] = miou_json(r.majority);
      j["majority_class"] = class_name(r.majority_class);
      j["bg_queries_processed_per_scene"] = static_cast<double>(r.counts.bg_processed) / r.scenes;
    }
    *result_json = dup(j.dump(2));
  });
}

mixocc_status mixocc_infer(mixocc_model* m, const char* png_path, const char* camera_path, const char* out_label_path,
                           char** result_json) {
  if (!m || !png_path || !camera_path) return fail(MIXOCC_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const auto& cfg = m->cfg;
    const Image img = read_png(png_path);
    if (img.width != cfg.data.image_width || img.height != cfg.data.image_height)
      throw std::invalid_argument("image size does not match the config");
    const CameraModel cam = read_camera(camera_path, img.width, img.height);
    const auto pred = m->model->predict(image_tensor(img).unsqueeze(0), {cam}).front();
    if (out_label_path) write_voxel_labels(out_label_path, pred.scene.grid);
    json dets = json::array();
    for (const auto& d : pred.detections) {
      dets.push_back({{"class", class_name(d.class_id)},
                      {"confidence", d.confidence},
                      {"box2d", {d.box2d.cx, d.box2d.cy, d.box2d.w, d.box2d.h}},
                      {"box3d_camera",
                       {d.box3d.center[0], d.box3d.center[1], d.box3d.center[2], d.box3d.size[0], d.box3d.size[1],
                        d.box3d.size[2]}}});
    }
    std::int64_t occupied = 0;
    for (Label l : pred.scene.grid.labels) occupied += l != kFree;
    const json j{{"detections", dets},
                 {"occupied_voxels", occupied},
                 {"bg_queries_processed", pred.counts.bg_processed},
                 {"fg_queries_processed", pred.counts.fg_processed}};
    if (result_json) *result_json = dup(j.dump(2));
  });
}

mixocc_status mixocc_bench(const char* config_path, const char* out_dir, const char* options_json, char** report_json) {
  if (!out_dir) return fail(MIXOCC_ERR_INVALID_ARGUMENT, "out_dir is null");
  return guarded([&] {
    const Config cfg = config_from(config_path);
    const json opts = options_json && *options_json ? json::parse(options_json) : json::object();
    const json r = run_bench(cfg, out_dir, opts);
    if (report_json) *report_json = dup(r.dump(2));
  });
}

}  // extern "C"
