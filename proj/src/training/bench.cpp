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


#include "training/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mixocc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json counts_json(const QueryCounts& c) {
  return {{"bg_processed", c.bg_processed},
          {"fg_processed", c.fg_processed},
          {"children_scored", c.children_scored},
          {"bg_per_level", c.bg_per_level}};
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(prec) << v;
  return o.str();
}

// Minimal SVG canvas; enough for bars and polylines.
struct Svg {
  double w, h;
  std::ostringstream body;
  Svg(double w_, double h_) : w(w_), h(h_) {}
  void text(double x, double y, const std::string& s, int size = 12, const char* anchor = "start") {
    body << "<text x='" << x << "' y='" << y << "' font-size='" << size << "' text-anchor='" << anchor
         << "' font-family='sans-serif'>" << s << "</text>\n";
  }
  void rect(double x, double y, double rw, double rh, const char* fill) {
    body << "<rect x='" << x << "' y='" << y << "' width='" << rw << "' height='" << rh << "' fill='" << fill
         << "'/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const char* stroke, const char* dash = nullptr) {
    body << "<line x1='" << x1 << "' y1='" << y1 << "' x2='" << x2 << "' y2='" << y2 << "' stroke='" << stroke
         << "'" << (dash ? std::string(" stroke-dasharray='") + dash + "'" : "") << "/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const char* stroke) {
    body << "<polyline fill='none' stroke-width='2' stroke='" << stroke << "' points='";
    for (const auto& [x, y] : pts) body << x << "," << y << " ";
    body << "'/>\n";
  }
  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n"
        << "<rect width='100%' height='100%' fill='white'/>\n"
        << body.str() << "</svg>\n";
  }
};

}  // namespace

OccupancyModel make_model(const Config& cfg, std::uint64_t seed) {
  torch::manual_seed(seed);
  return OccupancyModel(cfg);
}

DecodeBench bench_decode(const Config& cfg, int reps, std::uint64_t seed) {
  if (reps < 1) throw std::invalid_argument("bench_decode: reps must be >= 1");
  torch::NoGradGuard ng;
  auto model = make_model(cfg, seed);
  model->eval();
  const auto scene = prepare_scene(generate_scene(cfg.data, seed), cfg);
  const auto pyr = model->detector->encode_features(scene.image.unsqueeze(0)).image(0);
  auto& occ = model->occ;

  std::vector<int> mixed_k, dense_k;
  for (int l = 1; l <= occ->levels(); ++l) {
    mixed_k.push_back(cfg.k_at(l));
    dense_k.push_back(static_cast<int>(occ->level_shape(l).cells()));
  }
  DecodeBench b;
  b.dense_voxels = cfg.data.grid.cells();
  auto run = [&](const std::vector<int>& ks, DecodeTiming& t) {
    occ->set_k(ks);
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = occ->forward({}, pyr, scene.camera);
    t.ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    t.counts = out.counts;
  };
  // One untimed pass each warms the allocator.
  DecodeTiming warm;
  run(mixed_k, warm);
  run(dense_k, warm);
  for (int r = 0; r < reps; ++r) {
    run(mixed_k, b.mixed);
    run(dense_k, b.dense);
  }
  occ->set_k(mixed_k);
  b.mixed.median_ms = median(b.mixed.ms);
  b.dense.median_ms = median(b.dense.ms);
  b.ratio = b.mixed.median_ms / b.dense.median_ms;
  return b;
}

ConvergenceResult convergence_study(Config cfg, const ConvergenceOptions& opt) {
  if (opt.seeds.empty()) throw std::invalid_argument("convergence_study: no seeds");
  cfg.training.train_occupancy = false;
  cfg.training.pretrain_epochs = opt.pretrain_epochs;
  cfg.training.epochs = opt.main_epochs;
  const Dataset data = synth_dataset(cfg, opt.n_train, opt.n_val, opt.data_seed);

  ConvergenceResult res;
  std::vector<double> with, without;
  for (const bool pre : {true, false}) {
    for (const auto seed : opt.seeds) {
      Config c = cfg;
      c.training.seed = seed;
      Trainer trainer(c, make_model(c, seed));
      TrainOptions to;
      to.eval_occupancy = false;
      to.stop_map = opt.target_map;
      to.quiet = opt.quiet;
      ConvergenceRun run{seed, pre, {}, -1};
      auto absorb = [&](const std::vector<json>& recs) {
        for (const auto& r : recs) {
          run.map.push_back(r.at("map").get<double>());
          if (run.epochs_to_target < 0 && run.map.back() >= opt.target_map)
            run.epochs_to_target = static_cast<int>(run.map.size());
        }
      };
      if (pre && opt.pretrain_epochs > 0) absorb(trainer.run(Phase::pretrain, data, to));
      if (run.epochs_to_target < 0) absorb(trainer.run(Phase::main, data, to));
      if (pre) {
        with.push_back(run.epochs_to_target < 0 ? std::numeric_limits<double>::infinity() : run.epochs_to_target);
      } else {
        without.push_back(run.epochs_to_target < 0 ? opt.main_epochs + 1 : run.epochs_to_target);
      }
      res.runs.push_back(std::move(run));
    }
  }
  res.with_all_reached = std::all_of(with.begin(), with.end(), [](double e) { return std::isfinite(e); });
  res.median_with = median(with);
  res.median_without = median(without);
  res.ratio = res.median_with / res.median_without;
  return res;
}

json to_json(const DecodeBench& b) {
  auto t = [](const DecodeTiming& d) {
    return json{{"counts", counts_json(d.counts)}, {"ms", d.ms}, {"median_ms", d.median_ms}};
  };
  return {{"mixed", t(b.mixed)},
          {"dense", t(b.dense)},
          {"dense_voxels", b.dense_voxels},
          {"bg_fraction", static_cast<double>(b.mixed.counts.bg_processed) / static_cast<double>(b.dense_voxels)},
          {"time_ratio", b.ratio}};
}

json to_json(const ConvergenceResult& r) {
  json runs = json::array();
  for (const auto& x : r.runs) {
    runs.push_back({{"seed", x.seed},
                    {"pretrain", x.pretrain},
                    {"map", x.map},
                    {"epochs_to_target", x.epochs_to_target}});
  }
  return {{"runs", runs},
          {"median_epochs_with_pretrain", std::isfinite(r.median_with) ? json(r.median_with) : json(nullptr)},
          {"median_epochs_without_pretrain", r.median_without},
          {"ratio", std::isfinite(r.ratio) ? json(r.ratio) : json(nullptr)},
          {"with_pretrain_all_reached", r.with_all_reached}};
}

void write_decode_svg(const std::string& path, const DecodeBench& b) {
  Svg s(640, 300);
  s.text(320, 22, "background queries per level and decode time", 14, "middle");
  const auto& mk = b.mixed.counts.bg_per_level;
  const auto& dk = b.dense.counts.bg_per_level;
  double top = 1;
  for (auto v : dk) top = std::max(top, static_cast<double>(v));
  const double x0 = 50, y0 = 250, hmax = 190, bw = 28;
  for (std::size_t l = 0; l < dk.size(); ++l) {
    const double x = x0 + l * 90.0;
    const double hm = l < mk.size() ? hmax * mk[l] / top : 0, hd = hmax * dk[l] / top;
    s.rect(x, y0 - hm, bw, hm, "#2b7bb9");
    s.rect(x + bw + 4, y0 - hd, bw, hd, "#d9822b");
    s.text(x + bw, y0 + 16, "level " + std::to_string(l), 11, "middle");
    if (l < mk.size()) s.text(x + bw / 2, y0 - hm - 4, std::to_string(mk[l]), 10, "middle");
    s.text(x + 1.5 * bw + 4, y0 - hd - 4, std::to_string(dk[l]), 10, "middle");
  }
  s.line(x0 - 5, y0, x0 + 90.0 * dk.size(), y0, "black");
  const double tx = 420, tmax = std::max(b.mixed.median_ms, b.dense.median_ms);
  const double hm = hmax * b.mixed.median_ms / tmax, hd = hmax * b.dense.median_ms / tmax;
  s.rect(tx, y0 - hm, 50, hm, "#2b7bb9");
  s.rect(tx + 70, y0 - hd, 50, hd, "#d9822b");
  s.text(tx + 25, y0 - hm - 4, fmt(b.mixed.median_ms, 1) + " ms", 10, "middle");
  s.text(tx + 95, y0 - hd - 4, fmt(b.dense.median_ms, 1) + " ms", 10, "middle");
  s.text(tx + 60, y0 + 16, "median decode, ratio " + fmt(b.ratio), 11, "middle");
  s.line(tx - 5, y0, tx + 125, y0, "black");
  s.rect(50, 280, 12, 12, "#2b7bb9");
  s.text(66, 290, "mixed (top-K)", 11);
  s.rect(170, 280, 12, 12, "#d9822b");
  s.text(186, 290, "dense", 11);
  s.save(path);
}

void write_convergence_svg(const std::string& path, const ConvergenceResult& r, double target) {
  Svg s(640, 360);
  s.text(320, 22, "validation mAP@0.5 per optimization epoch", 14, "middle");
  std::size_t emax = 1;
  for (const auto& x : r.runs) emax = std::max(emax, x.map.size());
  const double x0 = 60, y0 = 310, pw = 540, ph = 260;
  auto px = [&](double e) { return x0 + pw * e / static_cast<double>(emax); };
  auto py = [&](double m) { return y0 - ph * std::clamp(m, 0.0, 1.0); };
  s.line(x0, y0, x0 + pw, y0, "black");
  s.line(x0, y0, x0, y0 - ph, "black");
  for (int i = 0; i <= 4; ++i) s.text(x0 - 6, py(i / 4.0) + 4, fmt(i / 4.0, 2), 10, "end");
  for (std::size_t e = 0; e <= emax; e += std::max<std::size_t>(1, emax / 10))
    s.text(px(e), y0 + 16, std::to_string(e), 10, "middle");
  s.line(x0, py(target), x0 + pw, py(target), "gray", "4,3");
  for (const auto& x : r.runs) {
    std::vector<std::pair<double, double>> pts{{px(0), py(0)}};
    for (std::size_t e = 0; e < x.map.size(); ++e) pts.emplace_back(px(e + 1.0), py(x.map[e]));
    s.polyline(pts, x.pretrain ? "#2b7bb9" : "#d9822b");
  }
  s.text(x0 + pw / 2, 345, "epoch", 11, "middle");
  s.rect(x0 + 10, 40, 12, 12, "#2b7bb9");
  s.text(x0 + 26, 50, "with early-matching pretraining", 11);
  s.rect(x0 + 250, 40, 12, 12, "#d9822b");
  s.text(x0 + 266, 50, "without", 11);
  s.save(path);
}

json run_bench(const Config& cfg, const std::string& out_dir, const json& opts) {
  fs::create_directories(out_dir);
  const int reps = opts.value("reps", 5);
  const std::uint64_t seed = opts.value("seed", std::uint64_t{0});
  const auto dec = bench_decode(cfg, reps, seed);
  write_decode_svg((fs::path(out_dir) / "decode.svg").string(), dec);
  json report{{"decode", to_json(dec)}};

  std::ostringstream txt;
  txt << "grid " << cfg.data.grid.d << "x" << cfg.data.grid.w << "x" << cfg.data.grid.h << " = " << dec.dense_voxels
      << " voxels\n";
  txt << "bg queries processed: mixed " << dec.mixed.counts.bg_processed << " ("
      << fmt(100.0 * dec.mixed.counts.bg_processed / dec.dense_voxels, 2) << "% of dense voxels), dense "
      << dec.dense.counts.bg_processed << "\n";
  txt << "per level mixed:";
  for (auto v : dec.mixed.counts.bg_per_level) txt << " " << v;
  txt << "\nper level dense:";
  for (auto v : dec.dense.counts.bg_per_level) txt << " " << v;
  txt << "\nmedian bg decode: mixed " << fmt(dec.mixed.median_ms, 2) << " ms, dense " << fmt(dec.dense.median_ms, 2)
      << " ms, ratio " << fmt(dec.ratio, 4) << "\n";

  if (opts.value("convergence", false)) {
    ConvergenceOptions co;
    co.n_train = opts.value("scenes", co.n_train);
    co.n_val = opts.value("val_scenes", co.n_val);
    co.data_seed = opts.value("data_seed", co.data_seed);
    if (opts.contains("seeds")) co.seeds = opts.at("seeds").get<std::vector<std::uint64_t>>();
    co.pretrain_epochs = opts.value("pretrain_epochs", co.pretrain_epochs);
    co.main_epochs = opts.value("max_epochs", co.main_epochs);
    co.target_map = opts.value("target_map", co.target_map);
    co.quiet = opts.value("quiet", true);
    const auto conv = convergence_study(cfg, co);
    write_convergence_svg((fs::path(out_dir) / "convergence.svg").string(), conv, co.target_map);
    report["convergence"] = to_json(conv);
    txt << "convergence (detector only, target mAP@0.5 " << co.target_map << "):\n";
    for (const auto& r : conv.runs) {
      txt << "  seed " << r.seed << (r.pretrain ? " with pretrain:    " : " without pretrain: ")
          << (r.epochs_to_target < 0 ? std::string("not reached") : std::to_string(r.epochs_to_target) + " epochs")
          << "\n";
    }
    txt << "  median epochs with " << fmt(conv.median_with, 1) << ", without " << fmt(conv.median_without, 1)
        << ", ratio " << fmt(conv.ratio) << "\n";
  }
  std::ofstream(fs::path(out_dir) / "report.txt") << txt.str();
  std::ofstream(fs::path(out_dir) / "report.json") << report.dump(2) << "\n";
  report["text"] = txt.str();
  return report;
}

}  // namespace mixocc
