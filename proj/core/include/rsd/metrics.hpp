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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsd/geometry.hpp"

namespace rsd {

// ---------------------------------------------------------------------------
// Risk consistency

enum class DiffRiskNumerator {
  kFrobenius,         // ||gt - pred||_F
  kElementwiseMean,   // mean_i |gt_i - pred_i|
};

struct RiskVectorPair {
  std::vector<double> gt;
  std::vector<double> pred;

  void validate() const;
};

// Normalized distance between ground-truth and predicted risk scores.
// Throws UndefinedMetricError when ||gt||_F is zero.
double diff_risk(const RiskVectorPair& pair,
                 DiffRiskNumerator numerator = DiffRiskNumerator::kFrobenius);

// Mean of per-frame values.
double diff_risk_mean(std::span<const RiskVectorPair> frames,
                      DiffRiskNumerator numerator = DiffRiskNumerator::kFrobenius);

// A risk-scored box in one camera view. bbox is [x1, y1, x2, y2].
struct RiskBox {
  std::size_t view = 0;
  std::array<double, 4> bbox{};
  double risk_score = 0.0;
};

double box_iou(const std::array<double, 4>& a, const std::array<double, 4>& b);

// Greedy alignment in descending predicted score: each prediction takes the
// unmatched same-view ground truth with the highest IoU >= threshold.
// Unmatched ground truth pairs with 0 and unmatched predictions pair
// against 0.
RiskVectorPair align_risk(std::span<const RiskBox> gt, std::span<const RiskBox> pred,
                          double iou_threshold = 0.5);

// ---------------------------------------------------------------------------
// Perception

struct Detection {
  std::string category;
  Vec3 position;         // m
  Vec3 size{1, 1, 1};    // (w, l, h) m
  double yaw = 0.0;      // rad
  Vec2 velocity;         // m/s
  double score = 1.0;    // predictions only
};

struct DetectionFrame {
  std::vector<Detection> predictions;
  std::vector<Detection> ground_truth;
};

using DetectionSet = std::vector<DetectionFrame>;

inline const std::vector<double> kDefaultMatchThresholds = {0.5, 1.0, 2.0, 4.0};
inline constexpr std::size_t kRecallLevels = 101;

// Interpolated AP of a score-ranked TP/FP sequence: precision envelope
// sampled at 101 recall levels 0.00 .. 1.00 and averaged.
double interpolated_ap(const std::vector<bool>& ranked_tp, std::size_t n_gt);

// Mean over ground-truth categories and match thresholds. Greedy matching
// in descending score; a prediction matches the nearest free same-category
// ground truth in the frame whose planar centre distance is below the
// threshold. Throws UndefinedMetricError when there is no ground truth.
double mean_ap(const DetectionSet& dets,
               std::span<const double> thresholds = kDefaultMatchThresholds);

enum class SpatialError {
  kSize,      // 1 - IoU of the centred, aligned boxes
  kPosition,  // |p - p_hat|, 3D centre distance
};

struct TpErrors {
  double mate = 0.0;
  double mase = 0.0;
  double maoe = 0.0;
  double mave = 0.0;
};

// Errors over true-positive pairs: per category mean, then mean over
// categories, then mean over thresholds that produced matches. Throws
// UndefinedMetricError when nothing matches at any threshold.
TpErrors tp_errors(const DetectionSet& dets,
                   std::span<const double> thresholds = kDefaultMatchThresholds,
                   SpatialError spatial = SpatialError::kSize);

double mate(const DetectionSet& dets,
            std::span<const double> thresholds = kDefaultMatchThresholds);
double mase(const DetectionSet& dets,
            std::span<const double> thresholds = kDefaultMatchThresholds,
            SpatialError spatial = SpatialError::kSize);
double maoe(const DetectionSet& dets,
            std::span<const double> thresholds = kDefaultMatchThresholds);
double mave(const DetectionSet& dets,
            std::span<const double> thresholds = kDefaultMatchThresholds);

// Smallest absolute angle between two headings, in [0, pi].
double angle_diff(double a, double b);

// (1/M) * sum_m score_m / log2(m + 1), m counted from 1.
double nds(std::span<const double> task_scores);

// Task scores fed to nds() in the report: mAP followed by 1 - min(1, err)
// for mATE, mASE, mAOE, mAVE (missing errors score 0).
std::vector<double> nds_task_scores(double map, const std::optional<TpErrors>& errors);

// ---------------------------------------------------------------------------
// Planning

struct TrajectoryPair {
  std::vector<Vec2> pred;
  std::vector<Vec2> gt;
};

double ade(const TrajectoryPair& pair, std::size_t horizon);

// Rectangle in the ground plane; `length` runs along the heading.
struct OrientedRect {
  Vec2 center;
  double length = 0.0;
  double width = 0.0;
  double yaw = 0.0;
};

std::array<Vec2, 4> rect_corners(const OrientedRect& r);

// Separating-axis test on closed rectangles: touching counts as overlap.
bool rects_intersect(const OrientedRect& a, const OrientedRect& b);

struct BoxSequence {
  std::vector<OrientedRect> ego;
  std::vector<std::vector<OrientedRect>> objects;  // per step
};

// (1/h) * sum over the first h steps of [ego box overlaps any object box].
double collision_rate(const BoxSequence& seq, std::size_t horizon);

// Ego boxes along a planned path starting at the origin, heading along the
// direction of travel (held when the ego does not move).
std::vector<OrientedRect> ego_boxes_along(std::span<const Vec2> plan,
                                          double length, double width);

// ---------------------------------------------------------------------------
// Frame-level evaluation

inline constexpr double kDefaultEgoLength = 4.084;
inline constexpr double kDefaultEgoWidth = 1.73;

struct EvalFrame {
  std::string id;
  DetectionFrame detections;
  std::vector<Vec2> plan;
  std::vector<Vec2> gt_plan;
  double ego_length = kDefaultEgoLength;
  double ego_width = kDefaultEgoWidth;
  std::vector<std::vector<OrientedRect>> obj_future;  // per step
  std::vector<RiskBox> risk_gt;
  std::vector<RiskBox> risk_pred;
};

struct EvalOptions {
  std::vector<double> thresholds = kDefaultMatchThresholds;
  SpatialError spatial = SpatialError::kSize;
  DiffRiskNumerator diff_risk = DiffRiskNumerator::kFrobenius;
  double risk_iou = 0.5;
  // 2 Hz planning cadence: 1 s, 2 s, 3 s.
  std::array<std::size_t, 3> horizons{2, 4, 6};
};

struct MetricReport {
  static constexpr std::array<const char*, 13> kFields = {
      "mAP",   "mATE",  "mASE",  "mAOE",  "mAVE",  "NDS",      "ADE_1s",
      "ADE_2s", "ADE_3s", "Col_1s", "Col_2s", "Col_3s", "Diff_Risk"};
  // Same order as kFields; empty when the metric is undefined for the input.
  std::array<std::optional<double>, 13> values{};

  std::optional<double> get(std::string_view field) const;
  std::string to_json() const;
};

MetricReport evaluate(std::span<const EvalFrame> frames, const EvalOptions& options = {});

// JSON-lines readers. Prediction lines carry "frame", "detections", "plan",
// "risk_pred"; ground-truth lines carry "frame", "gt", "gt_plan",
// "ego_size", "obj_future", "risk_gt". Frames are joined on "frame" and
// reported in ground-truth order.
std::vector<EvalFrame> parse_eval_frames(std::string_view pred_jsonl,
                                         std::string_view gt_jsonl);

// Array of {"view", "bbox", "risk_score"} records (extra keys ignored).
std::vector<RiskBox> parse_risk_boxes(std::string_view json);

// Single-line JSON records in the formats parse_eval_frames reads.
std::string pred_line(const EvalFrame& frame);
std::string gt_line(const EvalFrame& frame);

}  // namespace rsd
