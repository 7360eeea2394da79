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

#include "rsd/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "rsd/errors.hpp"
#include "rsd/io.hpp"
#include "rsd/riskhead.hpp"

namespace rsd {

using nlohmann::ordered_json;

namespace {

struct CategoryProfile {
  const char* name;
  Vec3 size;  // (w, l, h)
  double max_speed;
};

constexpr CategoryProfile kCategories[] = {
    {"car", {1.9, 4.6, 1.7}, 10.0},
    {"truck", {2.5, 8.0, 3.2}, 8.0},
    {"bus", {2.9, 11.0, 3.4}, 8.0},
    {"pedestrian", {0.7, 0.7, 1.75}, 1.5},
    {"bicycle", {0.6, 1.8, 1.3}, 5.0},
    {"motorcycle", {0.8, 2.1, 1.5}, 10.0},
    {"barrier", {2.5, 0.5, 1.0}, 0.0},
    {"construction cone", {0.4, 0.4, 0.9}, 0.0},
};

// Stream ids so the detector and planner noise do not shift when the
// object count changes.
constexpr std::uint64_t kObjectStream = 0x6f626a;
constexpr std::uint64_t kDetectorStream = 0x646574;
constexpr std::uint64_t kPlannerStream = 0x706c6e;
constexpr std::uint64_t kRiskStream = 0x72736b;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id)};
  return std::mt19937_64(seq);
}

bool footprint_contains(const SceneObject& o, double x, double y) {
  const double dx = x - o.center.x, dy = y - o.center.y;
  const double c = std::cos(o.yaw), s = std::sin(o.yaw);
  const double along = dx * c + dy * s;
  const double across = -dx * s + dy * c;
  return std::abs(along) <= 0.5 * o.size.y && std::abs(across) <= 0.5 * o.size.x;
}

std::string risk_level_for(double s) {
  if (s >= 0.7) return "high";
  if (s <= 0.3) return "low";
  return "medium";
}

double round_to(double v, double unit) { return std::round(v / unit) * unit; }

ordered_json vec3_json(Vec3 v) { return {v.x, v.y, v.z}; }

}  // namespace

double synthetic_risk(Vec3 center) {
  const double dist = std::hypot(center.x, center.y);
  if (dist <= 0.0) return 1.0;
  return std::clamp(kRiskUnitDistance / dist, 0.0, 1.0);
}

CameraRig ring_rig(const RunConfig& cfg) {
  CameraRig rig;
  const double cx = 0.5 * cfg.image_width, cy = 0.5 * cfg.image_height;
  for (std::size_t k = 0; k < cfg.cameras; ++k) {
    const double yaw = static_cast<double>(k) * cfg.camera_yaw_step_deg * std::numbers::pi / 180.0;
    Camera cam;
    cam.name = "CAM_" + std::to_string(k);
    cam.width = cfg.image_width;
    cam.height = cfg.image_height;
    cam.lidar2img = pinhole_lidar2img(cfg.focal, cx, cy, {0.0, 0.0, cfg.camera_height}, yaw);
    rig.cameras.push_back(std::move(cam));
  }
  return rig;
}

SyntheticScene make_scene(const RunConfig& cfg, std::uint64_t seed, std::size_t n_objects) {
  SyntheticScene scene;
  scene.seed = seed;
  scene.rig = ring_rig(cfg);
  auto rng = stream(seed, kObjectStream);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(kCategories) - 1);
  std::uniform_real_distribution<double> radius(4.0, 40.0);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n_objects; ++i) {
    const CategoryProfile& profile = kCategories[pick(rng)];
    SceneObject o;
    o.category = profile.name;
    o.size = profile.size;
    const double r = radius(rng), a = angle(rng);
    o.center = {r * std::cos(a), r * std::sin(a), 0.5 * profile.size.z};
    o.yaw = angle(rng);
    const double speed = profile.max_speed * unit(rng);
    o.velocity = {speed * std::cos(o.yaw), speed * std::sin(o.yaw)};
    o.risk_score = synthetic_risk(o.center);
    scene.objects.push_back(std::move(o));
  }
  return scene;
}

Tensor<double> scene_bev_queries(const SyntheticScene& scene, const BevGrid& grid) {
  grid.validate();
  Tensor<double> q({grid.n_bev(), grid.embed_dim});
  const auto& rg = grid.range;
  const double cell_x = (rg.x_max - rg.x_min) / static_cast<double>(grid.cols);
  const double cell_y = (rg.y_max - rg.y_min) / static_cast<double>(grid.rows);
  for (std::size_t row = 0; row < grid.rows; ++row) {
    for (std::size_t col = 0; col < grid.cols; ++col) {
      const std::size_t idx = row * grid.cols + col;
      for (std::size_t c = 1; c < grid.embed_dim; ++c) {
        const double k = static_cast<double>(c);
        q(idx, c) = 0.05 * std::sin(0.37 * k * static_cast<double>(col + 1) +
                                    0.11 * k * static_cast<double>(row + 1));
      }
      const double x = rg.x_min + (static_cast<double>(col) + 0.5) * cell_x;
      const double y = rg.y_min + (static_cast<double>(row) + 0.5) * cell_y;
      for (const auto& o : scene.objects) {
        if (footprint_contains(o, x, y)) q(idx, 0) = std::max(q(idx, 0), o.risk_score);
      }
    }
  }
  // Small objects may miss every cell centre; mark the cell under the centre.
  for (const auto& o : scene.objects) {
    const double fx = (o.center.x - rg.x_min) / cell_x;
    const double fy = (o.center.y - rg.y_min) / cell_y;
    if (fx < 0 || fy < 0 || fx >= static_cast<double>(grid.cols) ||
        fy >= static_cast<double>(grid.rows)) {
      continue;
    }
    const std::size_t idx =
        static_cast<std::size_t>(fy) * grid.cols + static_cast<std::size_t>(fx);
    q(idx, 0) = std::max(q(idx, 0), o.risk_score);
  }
  return q;
}

std::optional<std::array<double, 4>> project_box(const SceneObject& o, const Camera& cam,
                                                 double eps) {
  const double c = std::cos(o.yaw), s = std::sin(o.yaw);
  double x1 = std::numeric_limits<double>::infinity(), y1 = x1;
  double x2 = -x1, y2 = -x1;
  for (int corner = 0; corner < 8; ++corner) {
    const double a = (corner & 1 ? 0.5 : -0.5) * o.size.y;
    const double b = (corner & 2 ? 0.5 : -0.5) * o.size.x;
    const double h = (corner & 4 ? 0.5 : -0.5) * o.size.z;
    const Vec4 p{o.center.x + a * c - b * s, o.center.y + a * s + b * c, o.center.z + h, 1.0};
    const Vec4 img = mat4_apply(cam.lidar2img, p);
    if (img[2] <= eps) return std::nullopt;
    const double u = img[0] / img[2], v = img[1] / img[2];
    x1 = std::min(x1, u);
    x2 = std::max(x2, u);
    y1 = std::min(y1, v);
    y2 = std::max(y2, v);
  }
  const double w = cam.width, hgt = cam.height;
  std::array<double, 4> box{std::clamp(x1, 0.0, w), std::clamp(y1, 0.0, hgt),
                            std::clamp(x2, 0.0, w), std::clamp(y2, 0.0, hgt)};
  for (double& v : box) v = round_to(v, 0.01);
  if (!(box[2] > box[0]) || !(box[3] > box[1])) return std::nullopt;
  return box;
}

std::vector<RiskBox> scene_risk_boxes(const SyntheticScene& scene, double eps) {
  std::vector<RiskBox> out;
  for (std::size_t v = 0; v < scene.rig.size(); ++v) {
    const Camera& cam = scene.rig.cameras[v];
    for (const auto& o : scene.objects) {
      if (auto box = project_box(o, cam, eps)) {
        out.push_back({v,
                       {(*box)[0] / cam.width, (*box)[1] / cam.height, (*box)[2] / cam.width,
                        (*box)[3] / cam.height},
                       o.risk_score});
      }
    }
  }
  return out;
}

std::vector<RiskAnnotationEntry> scene_annotations(const SyntheticScene& scene,
                                                   std::size_t view, double eps) {
  const Camera& cam = scene.rig.cameras.at(view);
  const CategoryTable table;
  std::vector<RiskAnnotationEntry> out;
  for (const auto& o : scene.objects) {
    auto box = project_box(o, cam, eps);
    if (!box) continue;
    RiskAnnotationEntry e;
    e.category_id = table.id_of(o.category).value_or(-1);
    e.bbox = *box;
    e.risk_score = round_to(o.risk_score, 0.001);
    const std::string level = risk_level_for(e.risk_score);
    e.risk_level = level == "high" ? RiskLevel::kHigh
                   : level == "low" ? RiskLevel::kLow
                                    : RiskLevel::kMedium;
    e.category_name = o.category;
    e.reason = "synthetic label from the distance to the ego vehicle";
    out.push_back(std::move(e));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.risk_score > b.risk_score;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank_key = std::to_string(i);
  return out;
}

EvalFrame scene_eval_frame(const SyntheticScene& scene, double eps) {
  EvalFrame f;
  f.id = "0";
  auto det_rng = stream(scene.seed, kDetectorStream);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& o : scene.objects) {
    Detection gt;
    gt.category = o.category;
    gt.position = o.center;
    gt.size = o.size;
    gt.yaw = o.yaw;
    gt.velocity = o.velocity;
    f.detections.ground_truth.push_back(gt);

    // Draw every noise term even for missed objects so the stream stays
    // aligned across objects.
    const bool detected = unit(det_rng) < 0.9;
    Detection d = gt;
    d.position.x += 0.3 * n01(det_rng);
    d.position.y += 0.3 * n01(det_rng);
    d.position.z += 0.1 * n01(det_rng);
    d.size.x *= 1.0 + 0.05 * n01(det_rng);
    d.size.y *= 1.0 + 0.05 * n01(det_rng);
    d.size.z *= 1.0 + 0.05 * n01(det_rng);
    d.yaw += 0.1 * n01(det_rng);
    d.velocity.x += 0.3 * n01(det_rng);
    d.velocity.y += 0.3 * n01(det_rng);
    d.score = 0.5 + 0.5 * unit(det_rng);
    if (detected) f.detections.predictions.push_back(d);
  }
  if (!scene.objects.empty()) {
    // Two false positives of categories present in the scene.
    std::uniform_int_distribution<std::size_t> pick(0, scene.objects.size() - 1);
    std::uniform_real_distribution<double> coord(-40.0, 40.0);
    for (int i = 0; i < 2; ++i) {
      const SceneObject& like = scene.objects[pick(det_rng)];
      Detection d;
      d.category = like.category;
      d.position = {coord(det_rng), coord(det_rng), like.center.z};
      d.size = like.size;
      d.yaw = like.yaw;
      d.score = 0.1 + 0.4 * unit(det_rng);
      f.detections.predictions.push_back(d);
    }
  }

  auto plan_rng = stream(scene.seed, kPlannerStream);
  for (std::size_t k = 0; k < kPlanSteps; ++k) {
    const double t = kPlanDt * static_cast<double>(k + 1);
    const Vec2 gt{5.0 * t, 0.1 * t * t};
    const double sigma = 0.15 * static_cast<double>(k + 1) / static_cast<double>(kPlanSteps);
    f.gt_plan.push_back(gt);
    f.plan.push_back({gt.x + sigma * n01(plan_rng), gt.y + sigma * n01(plan_rng)});
    std::vector<OrientedRect> step;
    for (const auto& o : scene.objects) {
      step.push_back({{o.center.x + o.velocity.x * t, o.center.y + o.velocity.y * t},
                      o.size.y,
                      o.size.x,
                      o.yaw});
    }
    f.obj_future.push_back(std::move(step));
  }

  f.risk_gt = scene_risk_boxes(scene, eps);
  auto risk_rng = stream(scene.seed, kRiskStream);
  for (const auto& b : f.risk_gt) {
    RiskBox p = b;
    for (double& v : p.bbox) v = std::clamp(v + 0.005 * n01(risk_rng), 0.0, 1.0);
    p.risk_score = std::clamp(b.risk_score + 0.1 * n01(risk_rng), 0.0, 1.0);
    f.risk_pred.push_back(p);
  }
  return f;
}

void write_scene(const RunConfig& cfg, const SyntheticScene& scene,
                 const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  RunConfig effective = cfg;
  effective.seed = scene.seed;
  write_file(out_dir / "config.toml", config_to_toml(effective));

  ordered_json objects = ordered_json::array();
  for (const auto& o : scene.objects) {
    objects.push_back({{"category", o.category},
                       {"center", vec3_json(o.center)},
                       {"size", vec3_json(o.size)},
                       {"yaw", o.yaw},
                       {"velocity", {o.velocity.x, o.velocity.y}},
                       {"risk_score", o.risk_score}});
  }
  write_file(out_dir / "scene.json",
             dump_json({{"seed", scene.seed}, {"objects", std::move(objects)}}) + "\n");
  write_file(out_dir / "rig.json", rig_to_json(scene.rig));

  const BevGrid grid = cfg.bev_grid();
  TensorBundle queries;
  queries.put("queries", scene_bev_queries(scene, grid));
  queries.meta = {{"rows", grid.rows},
                  {"cols", grid.cols},
                  {"embed_dim", grid.embed_dim}};
  write_bundle(out_dir / "queries", queries);

  RiskHeadModel head = init_risk_head(cfg.head_shape(), scene.seed);
  head.attn.offset_scale = cfg.offset_scale;
  write_bundle(out_dir / "params", risk_head_to_bundle(head));

  const EvalFrame frame = scene_eval_frame(scene, cfg.depth_eps);
  write_file(out_dir / "gt.jsonl", gt_line(frame) + "\n");
  write_file(out_dir / "pred.jsonl", pred_line(frame) + "\n");

  for (std::size_t v = 0; v < scene.rig.size(); ++v) {
    const auto entries = scene_annotations(scene, v, cfg.depth_eps);
    write_file(out_dir / "annotations" / ("cam" + std::to_string(v) + ".json"),
               serialize_annotations(entries) + "\n");
  }
}

}  // namespace rsd
