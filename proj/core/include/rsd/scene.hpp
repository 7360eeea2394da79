// Copyright 2026 The RSD Authors.
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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rsd/annotation.hpp"
#include "rsd/config.hpp"
#include "rsd/geometry.hpp"
#include "rsd/metrics.hpp"

namespace rsd {

// Distance (m) at which the synthetic risk reaches 1.
inline constexpr double kRiskUnitDistance = 5.0;
// Planning steps emitted per frame (2 Hz, 3 s).
inline constexpr std::size_t kPlanSteps = 6;
inline constexpr double kPlanDt = 0.5;

// Synthetic risk label: clamp(kRiskUnitDistance / planar distance to the
// ego origin, 0, 1).
double synthetic_risk(Vec3 center);

struct SceneObject {
  std::string category;
  Vec3 center;          // lidar frame, m
  Vec3 size{1, 1, 1};   // (w, l, h)
  double yaw = 0.0;
  Vec2 velocity;
  double risk_score = 0.0;
};

struct SyntheticScene {
  std::uint64_t seed = 0;
  CameraRig rig;
  std::vector<SceneObject> objects;
};

// Ring of cfg.cameras pinhole cameras at cfg.camera_yaw_step_deg spacing,
// the first one facing +x.
CameraRig ring_rig(const RunConfig& cfg);

SyntheticScene make_scene(const RunConfig& cfg, std::uint64_t seed, std::size_t n_objects);

// BEV query features: channel 0 holds the highest risk among objects whose
// footprint covers the cell centre (or whose centre lies in the cell);
// the remaining channels hold a small fixed positional code.
Tensor<double> scene_bev_queries(const SyntheticScene& scene, const BevGrid& grid);

// Pixel-space box of an object in one camera: the extent of its eight
// projected corners clipped to the image. Empty when any corner is behind
// the camera or the clipped box has no area.
std::optional<std::array<double, 4>> project_box(const SceneObject& obj, const Camera& cam,
                                                 double eps = kDefaultDepthEpsilon);

// Ground-truth risk boxes in normalized image coordinates, every view.
std::vector<RiskBox> scene_risk_boxes(const SyntheticScene& scene, double eps);

// Rank-keyed annotation entries for one view, pixel coordinates, in
// descending risk order.
std::vector<RiskAnnotationEntry> scene_annotations(const SyntheticScene& scene,
                                                   std::size_t view, double eps);

// One evaluation frame: ground truth from the scene, noisy detector output
// and planner trajectory drawn from the scene seed.
EvalFrame scene_eval_frame(const SyntheticScene& scene, double eps);

// Writes config.toml, scene.json, rig.json, queries.{json,bin},
// params.{json,bin}, gt.jsonl, pred.jsonl and annotations/cam<k>.json.
void write_scene(const RunConfig& cfg, const SyntheticScene& scene,
                 const std::filesystem::path& out_dir);

}  // namespace rsd
