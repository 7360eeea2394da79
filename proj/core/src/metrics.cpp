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

#include "rsd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rsd/errors.hpp"
#include "rsd/io.hpp"

namespace rsd {

using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Risk consistency

void RiskVectorPair::validate() const {
  if (gt.size() != pred.size()) {
    throw ValidationError("risk vectors differ in length");
  }
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!std::all_of(gt.begin(), gt.end(), in_unit) ||
      !std::all_of(pred.begin(), pred.end(), in_unit)) {
    throw ValidationError("risk scores must lie in [0, 1]");
  }
}

double diff_risk(const RiskVectorPair& pair, DiffRiskNumerator numerator) {
  pair.validate();
  double gt_sq = 0.0, diff_sq = 0.0, diff_abs = 0.0;
  for (std::size_t i = 0; i < pair.gt.size(); ++i) {
    const double d = pair.gt[i] - pair.pred[i];
    gt_sq += pair.gt[i] * pair.gt[i];
    diff_sq += d * d;
    diff_abs += std::abs(d);
  }
  if (gt_sq == 0.0) {
    throw UndefinedMetricError("Diff_Risk is undefined for a zero-norm ground truth");
  }
  const double num = numerator == DiffRiskNumerator::kFrobenius
                         ? std::sqrt(diff_sq)
                         : diff_abs / static_cast<double>(pair.gt.size());
  return num / std::sqrt(gt_sq);
}

double diff_risk_mean(std::span<const RiskVectorPair> frames,
                      DiffRiskNumerator numerator) {
  if (frames.empty()) throw UndefinedMetricError("Diff_Risk over zero frames");
  double sum = 0.0;
  for (const auto& f : frames) sum += diff_risk(f, numerator);
  return sum / static_cast<double>(frames.size());
}

double box_iou(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  const double iw = std::min(a[2], b[2]) - std::max(a[0], b[0]);
  const double ih = std::min(a[3], b[3]) - std::max(a[1], b[1]);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double area_a = (a[2] - a[0]) * (a[3] - a[1]);
  const double area_b = (b[2] - b[0]) * (b[3] - b[1]);
  return inter / (area_a + area_b - inter);
}

RiskVectorPair align_risk(std::span<const RiskBox> gt, std::span<const RiskBox> pred,
                          double iou_threshold) {
  std::vector<std::size_t> order(pred.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pred[a].risk_score > pred[b].risk_score;
  });
  std::vector<bool> gt_taken(gt.size(), false), pred_taken(pred.size(), false);
  RiskVectorPair out;
  for (std::size_t pi : order) {
    double best = -1.0;
    std::size_t best_g = gt.size();
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (gt_taken[g] || gt[g].view != pred[pi].view) continue;
      const double iou = box_iou(gt[g].bbox, pred[pi].bbox);
      if (iou >= iou_threshold && iou > best) {
        best = iou;
        best_g = g;
      }
    }
    if (best_g < gt.size()) {
      gt_taken[best_g] = pred_taken[pi] = true;
      out.gt.push_back(gt[best_g].risk_score);
      out.pred.push_back(pred[pi].risk_score);
    }
  }
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (!gt_taken[g]) {
      out.gt.push_back(gt[g].risk_score);
      out.pred.push_back(0.0);
    }
  }
  for (std::size_t pi : order) {
    if (!pred_taken[pi]) {
      out.gt.push_back(0.0);
      out.pred.push_back(pred[pi].risk_score);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Perception

double interpolated_ap(const std::vector<bool>& ranked_tp, std::size_t n_gt) {
  if (n_gt == 0) throw UndefinedMetricError("AP needs at least one ground truth");
  const std::size_t n = ranked_tp.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked_tp[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
  }
  for (std::size_t i = n; i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double sum = 0.0;
  std::size_t i = 0;
  for (std::size_t k = 0; k < kRecallLevels; ++k) {
    const double level = static_cast<double>(k) / static_cast<double>(kRecallLevels - 1);
    while (i < n && recall[i] < level) ++i;
    if (i == n) break;
    sum += precision[i];
  }
  return sum / static_cast<double>(kRecallLevels);
}

namespace {

double planar_distance(const Detection& a, const Detection& b) {
  return std::hypot(a.position.x - b.position.x, a.position.y - b.position.y);
}

struct MatchedPair {
  const Detection* pred;
  const Detection* gt;
};

struct CategoryMatch {
  std::vector<bool> ranked_tp;
  std::size_t n_gt = 0;
  std::vector<MatchedPair> pairs;
};

CategoryMatch match_category(const DetectionSet& dets, const std::string& category,
                             double threshold) {
  struct Ranked {
    std::size_t frame;
    const Detection* det;
  };
  CategoryMatch m;
  std::vector<Ranked> preds;
  std::vector<std::vector<bool>> taken(dets.size());
  for (std::size_t f = 0; f < dets.size(); ++f) {
    taken[f].assign(dets[f].ground_truth.size(), false);
    for (const auto& g : dets[f].ground_truth) {
      if (g.category == category) ++m.n_gt;
    }
    for (const auto& p : dets[f].predictions) {
      if (p.category == category) preds.push_back({f, &p});
    }
  }
  std::stable_sort(preds.begin(), preds.end(), [](const Ranked& a, const Ranked& b) {
    return a.det->score > b.det->score;
  });
  for (const auto& r : preds) {
    const auto& gts = dets[r.frame].ground_truth;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_g = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[r.frame][g] || gts[g].category != category) continue;
      const double dist = planar_distance(*r.det, gts[g]);
      if (dist < best) {
        best = dist;
        best_g = g;
      }
    }
    const bool tp = best_g < gts.size() && best < threshold;
    if (tp) {
      taken[r.frame][best_g] = true;
      m.pairs.push_back({r.det, &gts[best_g]});
    }
    m.ranked_tp.push_back(tp);
  }
  return m;
}

std::vector<std::string> gt_categories(const DetectionSet& dets) {
  std::set<std::string> cats;
  for (const auto& f : dets) {
    for (const auto& g : f.ground_truth) cats.insert(g.category);
  }
  return {cats.begin(), cats.end()};
}

double size_error(const Detection& p, const Detection& g) {
  const double inter = std::min(p.size.x, g.size.x) * std::min(p.size.y, g.size.y) *
                       std::min(p.size.z, g.size.z);
  const double vp = p.size.x * p.size.y * p.size.z;
  const double vg = g.size.x * g.size.y * g.size.z;
  return 1.0 - inter / (vp + vg - inter);
}

void check_thresholds(std::span<const double> thresholds) {
  if (thresholds.empty()) throw ValidationError("need at least one match threshold");
  for (double t : thresholds) {
    if (!(t > 0.0)) throw ValidationError("match thresholds must be positive");
  }
}

}  // namespace

double mean_ap(const DetectionSet& dets, std::span<const double> thresholds) {
  check_thresholds(thresholds);
  const auto cats = gt_categories(dets);
  if (cats.empty()) throw UndefinedMetricError("mAP is undefined without ground truth");
  double sum = 0.0;
  for (const auto& c : cats) {
    for (double t : thresholds) {
      const CategoryMatch m = match_category(dets, c, t);
      sum += interpolated_ap(m.ranked_tp, m.n_gt);
    }
  }
  return sum / static_cast<double>(cats.size() * thresholds.size());
}

TpErrors tp_errors(const DetectionSet& dets, std::span<const double> thresholds,
                   SpatialError spatial) {
  check_thresholds(thresholds);
  const auto cats = gt_categories(dets);
  TpErrors total;
  std::size_t used_thresholds = 0;
  for (double t : thresholds) {
    TpErrors per_t;
    std::size_t used_cats = 0;
    for (const auto& c : cats) {
      const CategoryMatch m = match_category(dets, c, t);
      if (m.pairs.empty()) continue;
      TpErrors e;
      for (const auto& [p, g] : m.pairs) {
        e.mate += planar_distance(*p, *g);
        e.mase += spatial == SpatialError::kSize
                      ? size_error(*p, *g)
                      : std::sqrt(std::pow(p->position.x - g->position.x, 2) +
                                  std::pow(p->position.y - g->position.y, 2) +
                                  std::pow(p->position.z - g->position.z, 2));
        e.maoe += angle_diff(p->yaw, g->yaw);
        e.mave += std::hypot(p->velocity.x - g->velocity.x, p->velocity.y - g->velocity.y);
      }
      const double n = static_cast<double>(m.pairs.size());
      per_t.mate += e.mate / n;
      per_t.mase += e.mase / n;
      per_t.maoe += e.maoe / n;
      per_t.mave += e.mave / n;
      ++used_cats;
    }
    if (used_cats == 0) continue;
    const double nc = static_cast<double>(used_cats);
    total.mate += per_t.mate / nc;
    total.mase += per_t.mase / nc;
    total.maoe += per_t.maoe / nc;
    total.mave += per_t.mave / nc;
    ++used_thresholds;
  }
  if (used_thresholds == 0) {
    throw UndefinedMetricError("true-positive errors need at least one matched pair");
  }
  const double nt = static_cast<double>(used_thresholds);
  return {total.mate / nt, total.mase / nt, total.maoe / nt, total.mave / nt};
}

double mate(const DetectionSet& d, std::span<const double> t) { return tp_errors(d, t).mate; }
double mase(const DetectionSet& d, std::span<const double> t, SpatialError s) {
  return tp_errors(d, t, s).mase;
}
double maoe(const DetectionSet& d, std::span<const double> t) { return tp_errors(d, t).maoe; }
double mave(const DetectionSet& d, std::span<const double> t) { return tp_errors(d, t).mave; }

double angle_diff(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
  if (d > std::numbers::pi) d = 2.0 * std::numbers::pi - d;
  return d;
}

double nds(std::span<const double> scores) {
  if (scores.empty()) throw ValidationError("NDS needs at least one task score");
  double sum = 0.0;
  for (std::size_t m = 1; m <= scores.size(); ++m) {
    sum += scores[m - 1] / std::log2(static_cast<double>(m) + 1.0);
  }
  return sum / static_cast<double>(scores.size());
}

std::vector<double> nds_task_scores(double map, const std::optional<TpErrors>& e) {
  auto score = [](double err) { return 1.0 - std::min(1.0, err); };
  if (!e) return {map, 0.0, 0.0, 0.0, 0.0};
  return {map, score(e->mate), score(e->mase), score(e->maoe), score(e->mave)};
}

// ---------------------------------------------------------------------------
// Planning

double ade(const TrajectoryPair& pair, std::size_t horizon) {
  if (horizon == 0) throw ValidationError("ADE horizon must be at least one step");
  if (pair.pred.size() != pair.gt.size()) {
    throw ValidationError("trajectories differ in length");
  }
  if (horizon > pair.pred.size()) {
    throw ValidationError("ADE horizon exceeds the trajectory length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < horizon; ++i) {
    sum += std::hypot(pair.pred[i].x - pair.gt[i].x, pair.pred[i].y - pair.gt[i].y);
  }
  return sum / static_cast<double>(horizon);
}

std::array<Vec2, 4> rect_corners(const OrientedRect& r) {
  const double c = std::cos(r.yaw), s = std::sin(r.yaw);
  const double hl = r.length / 2.0, hw = r.width / 2.0;
  const double sx[4] = {1, -1, -1, 1}, sy[4] = {1, 1, -1, -1};
  std::array<Vec2, 4> out;
  for (int i = 0; i < 4; ++i) {
    const double lx = sx[i] * hl, ly = sy[i] * hw;
    out[i] = {r.center.x + c * lx - s * ly, r.center.y + s * lx + c * ly};
  }
  return out;
}

namespace {

void check_rect(const OrientedRect& r) {
  if (!(r.length > 0.0) || !(r.width > 0.0)) {
    throw ValidationError("degenerate box: length and width must be positive");
  }
}

// Half-width of the rectangle's shadow on a unit axis.
double projected_radius(const OrientedRect& r, double ax, double ay) {
  const double c = std::cos(r.yaw), s = std::sin(r.yaw);
  return r.length / 2.0 * std::abs(c * ax + s * ay) +
         r.width / 2.0 * std::abs(-s * ax + c * ay);
}

}  // namespace

bool rects_intersect(const OrientedRect& a, const OrientedRect& b) {
  check_rect(a);
  check_rect(b);
  const double dx = b.center.x - a.center.x, dy = b.center.y - a.center.y;
  const double axes[4][2] = {{std::cos(a.yaw), std::sin(a.yaw)},
                             {-std::sin(a.yaw), std::cos(a.yaw)},
                             {std::cos(b.yaw), std::sin(b.yaw)},
                             {-std::sin(b.yaw), std::cos(b.yaw)}};
  for (const auto& ax : axes) {
    const double gap = std::abs(dx * ax[0] + dy * ax[1]);
    if (gap > projected_radius(a, ax[0], ax[1]) + projected_radius(b, ax[0], ax[1])) {
      return false;
    }
  }
  return true;
}

double collision_rate(const BoxSequence& seq, std::size_t horizon) {
  if (horizon == 0) throw ValidationError("collision horizon must be at least one step");
  if (seq.ego.size() != seq.objects.size()) {
    throw ValidationError("ego and object box sequences differ in length");
  }
  if (horizon > seq.ego.size()) {
    throw ValidationError("collision horizon exceeds the sequence length");
  }
  std::size_t hits = 0;
  for (std::size_t t = 0; t < horizon; ++t) {
    bool hit = false;
    for (const auto& obj : seq.objects[t]) {
      if (rects_intersect(seq.ego[t], obj)) {
        hit = true;
        break;
      }
    }
    check_rect(seq.ego[t]);
    if (hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(horizon);
}

std::vector<OrientedRect> ego_boxes_along(std::span<const Vec2> plan, double length,
                                          double width) {
  std::vector<OrientedRect> boxes;
  Vec2 prev{0.0, 0.0};
  double yaw = 0.0;
  for (const Vec2& p : plan) {
    const double dx = p.x - prev.x, dy = p.y - prev.y;
    if (std::hypot(dx, dy) > 1e-9) yaw = std::atan2(dy, dx);
    boxes.push_back({p, length, width, yaw});
    prev = p;
  }
  return boxes;
}

// ---------------------------------------------------------------------------
// Report

std::optional<double> MetricReport::get(std::string_view field) const {
  for (std::size_t i = 0; i < kFields.size(); ++i) {
    if (field == kFields[i]) return values[i];
  }
  throw NotFoundError("unknown report field " + std::string(field));
}

std::string MetricReport::to_json() const {
  ordered_json j;
  for (std::size_t i = 0; i < kFields.size(); ++i) {
    j[kFields[i]] = values[i] ? ordered_json(*values[i]) : ordered_json(nullptr);
  }
  return dump_json(j);
}

MetricReport evaluate(std::span<const EvalFrame> frames, const EvalOptions& opt) {
  MetricReport report;
  auto& v = report.values;

  DetectionSet dets;
  for (const auto& f : frames) dets.push_back(f.detections);
  std::optional<double> map;
  std::optional<TpErrors> errs;
  try {
    map = mean_ap(dets, opt.thresholds);
  } catch (const UndefinedMetricError&) {
  }
  try {
    errs = tp_errors(dets, opt.thresholds, opt.spatial);
  } catch (const UndefinedMetricError&) {
  }
  v[0] = map;
  if (errs) {
    v[1] = errs->mate;
    v[2] = errs->mase;
    v[3] = errs->maoe;
    v[4] = errs->mave;
  }
  if (map) v[5] = nds(nds_task_scores(*map, errs));

  for (std::size_t h = 0; h < opt.horizons.size(); ++h) {
    const std::size_t horizon = opt.horizons[h];
    double ade_sum = 0.0, col_sum = 0.0;
    std::size_t ade_n = 0, col_n = 0;
    for (const auto& f : frames) {
      if (f.plan.size() >= horizon && f.gt_plan.size() >= horizon) {
        TrajectoryPair tp{{f.plan.begin(), f.plan.begin() + static_cast<std::ptrdiff_t>(horizon)},
                          {f.gt_plan.begin(), f.gt_plan.begin() + static_cast<std::ptrdiff_t>(horizon)}};
        ade_sum += ade(tp, horizon);
        ++ade_n;
      }
      if (f.plan.size() >= horizon && f.obj_future.size() >= horizon) {
        BoxSequence seq;
        seq.ego = ego_boxes_along(std::span(f.plan).first(horizon), f.ego_length,
                                  f.ego_width);
        seq.objects.assign(f.obj_future.begin(),
                           f.obj_future.begin() + static_cast<std::ptrdiff_t>(horizon));
        col_sum += collision_rate(seq, horizon);
        ++col_n;
      }
    }
    if (ade_n) v[6 + h] = ade_sum / static_cast<double>(ade_n);
    if (col_n) v[9 + h] = col_sum / static_cast<double>(col_n);
  }

  double dr_sum = 0.0;
  std::size_t dr_n = 0;
  for (const auto& f : frames) {
    const RiskVectorPair pair = align_risk(f.risk_gt, f.risk_pred, opt.risk_iou);
    try {
      dr_sum += diff_risk(pair, opt.diff_risk);
      ++dr_n;
    } catch (const UndefinedMetricError&) {
    }
  }
  if (dr_n) v[12] = dr_sum / static_cast<double>(dr_n);
  return report;
}

// ---------------------------------------------------------------------------
// JSON-lines I/O

namespace {

Vec2 vec2_from(const ordered_json& j) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Vec3 vec3_from(const ordered_json& j) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Detection detection_from(const ordered_json& j, bool scored) {
  Detection d;
  d.category = j.at("category").get<std::string>();
  d.position = vec3_from(j.at("position"));
  d.size = vec3_from(j.at("size"));
  d.yaw = j.at("yaw").get<double>();
  d.velocity = j.contains("velocity") ? vec2_from(j.at("velocity")) : Vec2{};
  if (!(d.size.x > 0 && d.size.y > 0 && d.size.z > 0)) {
    throw ValidationError("detection sizes must be positive");
  }
  if (scored) {
    d.score = j.at("score").get<double>();
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
      throw ValidationError("detection score must lie in [0, 1]");
    }
  }
  return d;
}

ordered_json detection_to(const Detection& d, bool scored) {
  ordered_json j = {{"category", d.category},
                    {"position", {d.position.x, d.position.y, d.position.z}},
                    {"size", {d.size.x, d.size.y, d.size.z}},
                    {"yaw", d.yaw},
                    {"velocity", {d.velocity.x, d.velocity.y}}};
  if (scored) j["score"] = d.score;
  return j;
}

std::vector<Vec2> path_from(const ordered_json& j) {
  std::vector<Vec2> out;
  for (const auto& p : j) out.push_back(vec2_from(p));
  return out;
}

ordered_json path_to(const std::vector<Vec2>& path) {
  ordered_json j = ordered_json::array();
  for (const auto& p : path) j.push_back({p.x, p.y});
  return j;
}

std::vector<RiskBox> risk_from(const ordered_json& j) {
  std::vector<RiskBox> out;
  for (const auto& r : j) {
    RiskBox b;
    b.view = r.value("view", std::size_t{0});
    const auto bb = r.at("bbox").get<std::vector<double>>();
    if (bb.size() != 4) throw ValidationError("risk bbox must have 4 entries");
    std::copy(bb.begin(), bb.end(), b.bbox.begin());
    b.risk_score = r.at("risk_score").get<double>();
    out.push_back(b);
  }
  return out;
}

ordered_json risk_to(const std::vector<RiskBox>& boxes) {
  ordered_json j = ordered_json::array();
  for (const auto& b : boxes) {
    j.push_back({{"view", b.view}, {"bbox", b.bbox}, {"risk_score", b.risk_score}});
  }
  return j;
}

OrientedRect rect_from(const ordered_json& j) {
  OrientedRect r;
  r.center = vec2_from(j.at("center"));
  const Vec2 size = vec2_from(j.at("size"));
  r.length = size.x;
  r.width = size.y;
  r.yaw = j.value("yaw", 0.0);
  return r;
}

ordered_json rect_to(const OrientedRect& r) {
  return {{"center", {r.center.x, r.center.y}},
          {"size", {r.length, r.width}},
          {"yaw", r.yaw}};
}

std::vector<ordered_json> read_lines(std::string_view text, const char* what) {
  std::vector<ordered_json> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(ordered_json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string(what) + " line " + std::to_string(lineno) + ": " +
                       e.what());
    }
  }
  return out;
}

std::string frame_key(const ordered_json& j, std::size_t fallback) {
  if (!j.contains("frame")) return std::to_string(fallback);
  const auto& f = j.at("frame");
  return f.is_string() ? f.get<std::string>() : f.dump();
}

}  // namespace

std::vector<RiskBox> parse_risk_boxes(std::string_view json) {
  ordered_json j;
  try {
    j = ordered_json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("risk boxes: ") + e.what());
  }
  if (!j.is_array()) throw ValidationError("risk boxes must be a JSON array");
  try {
    return risk_from(j);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("risk boxes: ") + e.what());
  }
}

std::vector<EvalFrame> parse_eval_frames(std::string_view pred_jsonl,
                                         std::string_view gt_jsonl) {
  const auto pred_lines = read_lines(pred_jsonl, "prediction");
  const auto gt_lines = read_lines(gt_jsonl, "ground truth");
  std::map<std::string, const ordered_json*> preds;
  for (std::size_t i = 0; i < pred_lines.size(); ++i) {
    preds[frame_key(pred_lines[i], i)] = &pred_lines[i];
  }
  std::vector<EvalFrame> frames;
  try {
    for (std::size_t i = 0; i < gt_lines.size(); ++i) {
      const auto& g = gt_lines[i];
      EvalFrame f;
      f.id = frame_key(g, i);
      auto it = preds.find(f.id);
      if (it == preds.end()) {
        throw ValidationError("no prediction record for frame " + f.id);
      }
      const auto& p = *it->second;
      for (const auto& d : g.value("gt", ordered_json::array())) {
        f.detections.ground_truth.push_back(detection_from(d, false));
      }
      for (const auto& d : p.value("detections", ordered_json::array())) {
        f.detections.predictions.push_back(detection_from(d, true));
      }
      f.plan = path_from(p.value("plan", ordered_json::array()));
      f.gt_plan = path_from(g.value("gt_plan", ordered_json::array()));
      if (g.contains("ego_size")) {
        const Vec2 s = vec2_from(g.at("ego_size"));
        f.ego_length = s.x;
        f.ego_width = s.y;
      }
      for (const auto& step : g.value("obj_future", ordered_json::array())) {
        std::vector<OrientedRect> boxes;
        for (const auto& r : step) boxes.push_back(rect_from(r));
        f.obj_future.push_back(std::move(boxes));
      }
      f.risk_gt = risk_from(g.value("risk_gt", ordered_json::array()));
      f.risk_pred = risk_from(p.value("risk_pred", ordered_json::array()));
      frames.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("evaluation record: ") + e.what());
  }
  return frames;
}

std::string pred_line(const EvalFrame& f) {
  ordered_json j;
  j["frame"] = f.id;
  j["detections"] = ordered_json::array();
  for (const auto& d : f.detections.predictions) j["detections"].push_back(detection_to(d, true));
  j["plan"] = path_to(f.plan);
  j["risk_pred"] = risk_to(f.risk_pred);
  return j.dump();
}

std::string gt_line(const EvalFrame& f) {
  ordered_json j;
  j["frame"] = f.id;
  j["gt"] = ordered_json::array();
  for (const auto& d : f.detections.ground_truth) j["gt"].push_back(detection_to(d, false));
  j["gt_plan"] = path_to(f.gt_plan);
  j["ego_size"] = {f.ego_length, f.ego_width};
  j["obj_future"] = ordered_json::array();
  for (const auto& step : f.obj_future) {
    ordered_json s = ordered_json::array();
    for (const auto& r : step) s.push_back(rect_to(r));
    j["obj_future"].push_back(std::move(s));
  }
  j["risk_gt"] = risk_to(f.risk_gt);
  return j.dump();
}

}  // namespace rsd
