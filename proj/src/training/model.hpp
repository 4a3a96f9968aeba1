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

#include <vector>

#include "detector/detector.hpp"
#include "occdecoder/occdecoder.hpp"
#include "semhead/semhead.hpp"
#include "synthdata/scene.hpp"
#include "training/losses.hpp"
#include "training/metrics.hpp"

namespace mixocc {

/// A scene converted once into the tensors training needs.
struct PreparedScene {
  Tensor image;  // [3, H, W]
  CameraModel camera;
  VoxelGrid gt;
  std::vector<ObjectLabel> labels;
  DetTargets targets;
  std::vector<Tensor> bg_levels;  // background-class occupancy per pyramid level, flat float
};

PreparedScene prepare_scene(const ScenePair& scene, const Config& cfg);
Tensor image_tensor(const Image& img);

struct Detection {
  Label class_id = 0;
  double confidence = 0;
  Box2D box2d;  // pixels
  Box3D box3d;  // camera frame
  int query = -1;
};

struct Prediction {
  std::vector<ScoredBox> scored;  // every query, class index into the foreground list
  std::vector<Detection> detections;  // thresholded, by decreasing confidence
  std::vector<FgObject> objects;      // aligned with `detections` that survived clipping
  std::vector<int> object_detection;  // detection index of each object
  AssembledScene scene;
  QueryCounts counts;
};

struct ForwardStats {
  std::int64_t n_gt = 0;
  QueryCounts counts;
};

class OccupancyModelImpl : public torch::nn::Module {
 public:
  explicit OccupancyModelImpl(const Config& cfg);

  /// Unweighted loss terms of a batch. Pretraining supervises the detector
  /// through early matching only; the main phase matches predictions with
  /// the Hungarian solver and adds the occupancy terms when `occupancy`.
  LossTerms compute_losses(const std::vector<const PreparedScene*>& batch, Phase phase, bool occupancy,
                           ForwardStats* stats = nullptr);
  /// Inference; runs under NoGrad. `occupancy` false skips the decoders.
  std::vector<Prediction> predict(const Tensor& images, const std::vector<CameraModel>& cams, bool occupancy = true);
  Prediction predict(const PreparedScene& scene, bool occupancy = true);

  std::vector<Tensor> detector_parameters() { return detector->parameters(); }
  std::vector<Tensor> occupancy_parameters();
  const Config& config() const { return cfg_; }

  Detector detector{nullptr};
  OccDecoder occ{nullptr};
  MaskFormer semhead{nullptr};

 private:
  void occupancy_losses(const std::vector<const PreparedScene*>& batch, const DetectorOutput& out,
                        const std::vector<Match>& matches, LossTerms& terms, ForwardStats* stats);
  Config cfg_;
  std::vector<Box2D> rois_;
};
TORCH_MODULE(OccupancyModel);

/// Per-scene quality against ground truth.
struct SceneQuality {
  std::vector<double> det_giou;  // per GT object: best GIoU among same-class detections (-1 if none)
  std::vector<double> fg_dice;   // per GT object: dice of that detection's local grid vs the object's local GT (0 if none)
  double bg_iou = 0;             // background-class voxel IoU
};

SceneQuality scene_quality(const Prediction& pred, const PreparedScene& scene, const Config& cfg);

/// GT boxes (pixels) of a scene as ScoredBox with foreground class indices.
std::vector<ScoredBox> gt_boxes(const PreparedScene& scene, const CategorySplit& split, int image);

}  // namespace mixocc
