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

// Scalar reference implementations written directly from the operator
// definitions. They share no code with the library beyond its plain data
// types, and favour obviousness over speed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rsd/geometry.hpp"
#include "rsd/metrics.hpp"
#include "rsd/rebatch.hpp"
#include "rsd/riskhead.hpp"

namespace oracle {

using rsd::Tensor;
using rsd::Vec2;

// ---------------------------------------------------------------------------
// Geometry

// Visibility bits [cameras][rows*cols][depth], by explicit loops over the
// lattice and a hand-written 4x4 product.
inline std::vector<std::vector<std::vector<int>>> bev_mask(const rsd::BevGrid& g,
                                                           const rsd::CameraRig& rig,
                                                           double eps) {
  std::vector<std::vector<std::vector<int>>> out(
      rig.size(), std::vector<std::vector<int>>(g.rows * g.cols, std::vector<int>(g.z_samples)));
  const auto& r = g.range;
  for (std::size_t k = 0; k < rig.size(); ++k) {
    const auto& m = rig.cameras[k].lidar2img;
    for (std::size_t row = 0; row < g.rows; ++row) {
      for (std::size_t col = 0; col < g.cols; ++col) {
        for (std::size_t d = 0; d < g.z_samples; ++d) {
          const double nx = (static_cast<double>(col) + 0.5) / static_cast<double>(g.cols);
          const double ny = (static_cast<double>(row) + 0.5) / static_cast<double>(g.rows);
          const double nz = (static_cast<double>(d) + 0.5) / static_cast<double>(g.z_samples);
          const double p[4] = {nx * (r.x_max - r.x_min) + r.x_min,
                               ny * (r.y_max - r.y_min) + r.y_min,
                               nz * (r.z_max - r.z_min) + r.z_min, 1.0};
          double c[3];
          for (int i = 0; i < 3; ++i) {
            c[i] = m[i * 4 + 0] * p[0] + m[i * 4 + 1] * p[1] + m[i * 4 + 2] * p[2] +
                   m[i * 4 + 3] * p[3];
          }
          int vis = 0;
          if (c[2] > eps) {
            const double x = (c[0] / c[2]) / rig.cameras[k].width;
            const double y = (c[1] / c[2]) / rig.cameras[k].height;
            vis = x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0;
          }
          out[k][row * g.cols + col][d] = vis;
        }
      }
    }
  }
  return out;
}

// Random pinhole rig with arbitrary yaw, pitch and roll, built from its own
// rotation so it does not lean on pinhole_lidar2img.
inline rsd::CameraRig random_rig(std::mt19937_64& rng, std::size_t cameras) {
  std::uniform_real_distribution<double> ang(-M_PI, M_PI), tilt(-0.3, 0.3), pos(-2.0, 2.0),
      foc(300.0, 1500.0);
  std::uniform_int_distribution<int> wdist(200, 1600), hdist(150, 900);
  rsd::CameraRig rig;
  for (std::size_t k = 0; k < cameras; ++k) {
    const double yaw = ang(rng), pitch = tilt(rng), roll = tilt(rng);
    const int w = wdist(rng), h = hdist(rng);
    const double f = foc(rng);
    const double t[3] = {pos(rng), pos(rng), pos(rng) + 1.5};
    // Base axes: right, down, forward for a camera looking along +x.
    const double cy = std::cos(yaw), sy = std::sin(yaw), cp = std::cos(pitch),
                 sp = std::sin(pitch), cr = std::cos(roll), sr = std::sin(roll);
    double fwd[3] = {cy * cp, sy * cp, -sp};
    double right0[3] = {sy, -cy, 0.0};
    double down0[3] = {fwd[1] * right0[2] - fwd[2] * right0[1],
                       fwd[2] * right0[0] - fwd[0] * right0[2],
                       fwd[0] * right0[1] - fwd[1] * right0[0]};
    double right[3], down[3];
    for (int i = 0; i < 3; ++i) {
      right[i] = cr * right0[i] + sr * down0[i];
      down[i] = -sr * right0[i] + cr * down0[i];
    }
    const double* axes[3] = {right, down, fwd};
    rsd::Mat4 e{};
    for (int r = 0; r < 3; ++r) {
      double tt = 0.0;
      for (int c = 0; c < 3; ++c) {
        e[r * 4 + c] = axes[r][c];
        tt -= axes[r][c] * t[c];
      }
      e[r * 4 + 3] = tt;
    }
    e[15] = 1.0;
    const double kmat[3][3] = {{f, 0, 0.5 * w}, {0, f, 0.5 * h}, {0, 0, 1}};
    rsd::Mat4 m{};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) {
        for (int i = 0; i < 3; ++i) m[r * 4 + c] += kmat[r][i] * e[i * 4 + c];
      }
    }
    m[15] = 1.0;
    rig.cameras.push_back({"C" + std::to_string(k), m, w, h});
  }
  return rig;
}

// ---------------------------------------------------------------------------
// Rebatch

// Ascending visible query indices for batch b, camera k.
inline std::vector<std::size_t> visible_indices(const rsd::BevMask& mask, std::size_t b,
                                                std::size_t k) {
  std::vector<std::size_t> out;
  for (std::size_t q = 0; q < mask.n_bev(); ++q) {
    bool any = false;
    for (std::size_t d = 0; d < mask.depth(); ++d) any = any || mask.visible(b, k, q, d);
    if (any) out.push_back(q);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nearest neighbour

struct NnHit {
  std::int64_t index;
  double distance;
};

// Full sort of every candidate by (distance, index).
inline std::vector<NnHit> nearest(const rsd::RebatchedQueries& rb, std::size_t b, std::size_t k,
                                  Vec2 c, std::size_t n) {
  std::vector<NnHit> all;
  const std::size_t depth = rb.depth();
  for (std::size_t l = 0; l < rb.lengths(b, k); ++l) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < depth; ++d) {
      const double dx = c.x - rb.ref2d_prime(b, k, l, d, std::size_t{0});
      const double dy = c.y - rb.ref2d_prime(b, k, l, d, std::size_t{1});
      best = std::min(best, dx * dx + dy * dy);
    }
    all.push_back({static_cast<std::int64_t>(l), std::sqrt(best)});
  }
  std::sort(all.begin(), all.end(), [](const NnHit& a, const NnHit& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
  });
  if (all.size() > n) all.resize(n);
  return all;
}

// ---------------------------------------------------------------------------
// Bilinear sampling and attention

inline std::vector<double> bilinear(const std::vector<double>& map, std::size_t h,
                                    std::size_t w, std::size_t c, Vec2 loc) {
  std::vector<double> out(c, 0.0);
  const double px = loc.x * static_cast<double>(w) - 0.5;
  const double py = loc.y * static_cast<double>(h) - 0.5;
  const double x0 = std::floor(px), y0 = std::floor(py);
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const double xi = x0 + dx, yi = y0 + dy;
      if (xi < 0 || yi < 0 || xi >= static_cast<double>(w) || yi >= static_cast<double>(h)) {
        continue;
      }
      const double wt = (dx ? px - x0 : 1.0 - (px - x0)) * (dy ? py - y0 : 1.0 - (py - y0));
      const std::size_t base =
          (static_cast<std::size_t>(yi) * w + static_cast<std::size_t>(xi)) * c;
      for (std::size_t i = 0; i < c; ++i) out[i] += wt * map[base + i];
    }
  }
  return out;
}

inline std::vector<double> matvec(const Tensor<double>& m, const std::vector<double>& v) {
  std::vector<double> out(m.dim(0), 0.0);
  for (std::size_t r = 0; r < m.dim(0); ++r) {
    for (std::size_t i = 0; i < m.dim(1); ++i) out[r] += m(r, i) * v[i];
  }
  return out;
}

// Deformable attention with the value projection applied to the whole map
// before sampling.
inline std::vector<double> deform_attn(const std::vector<double>& q, Vec2 ref,
                                       const std::vector<double>& map, std::size_t h,
                                       std::size_t w, const rsd::DeformAttnParams& p) {
  const std::size_t d = p.embed_dim, hd = d / p.n_heads;
  std::vector<double> projected(map.size());
  for (std::size_t cell = 0; cell < h * w; ++cell) {
    std::vector<double> v(map.begin() + static_cast<std::ptrdiff_t>(cell * d),
                          map.begin() + static_cast<std::ptrdiff_t>((cell + 1) * d));
    auto pv = matvec(p.value_w, v);
    for (std::size_t r = 0; r < d; ++r) projected[cell * d + r] = pv[r] + p.value_b[r];
  }
  auto off = matvec(p.offset_w, q);
  auto logit = matvec(p.attn_w, q);
  std::vector<double> concat(d, 0.0);
  for (std::size_t head = 0; head < p.n_heads; ++head) {
    std::vector<double> a(p.n_points);
    for (std::size_t j = 0; j < p.n_points; ++j) {
      a[j] = logit[head * p.n_points + j] + p.attn_b[head * p.n_points + j];
    }
    const double mx = *std::max_element(a.begin(), a.end());
    double z = 0.0;
    for (double& x : a) z += (x = std::exp(x - mx));
    for (std::size_t j = 0; j < p.n_points; ++j) {
      const std::size_t r = (head * p.n_points + j) * 2;
      const Vec2 loc{ref.x + p.offset_scale * (off[r] + p.offset_b[r]),
                     ref.y + p.offset_scale * (off[r + 1] + p.offset_b[r + 1])};
      const auto s = bilinear(projected, h, w, d, loc);
      for (std::size_t i = 0; i < hd; ++i) concat[head * hd + i] += a[j] / z * s[head * hd + i];
    }
  }
  auto out = matvec(p.output_w, concat);
  for (std::size_t r = 0; r < d; ++r) out[r] += p.output_b[r];
  return out;
}

// Risk-head aggregation written out per PV query:
//   out = sum_{k in V_hit} sum_j (1/|V_hit|) DeformAttn(q, ref_j, V_k)
// with ref_j the lattice centre of the j-th nearest candidate in the query's
// own camera and V_k camera k's rebatched features placed on the lattice.
inline Tensor<double> rha(const rsd::PvQueryGrid& pv, const rsd::RebatchedQueries& rb,
                          const rsd::VisibleIndexSets& idx, std::size_t rows, std::size_t cols,
                          const rsd::DeformAttnParams& p, std::size_t n_ref) {
  const std::size_t d = p.embed_dim, n_cam = rb.cameras(), n_bev = rows * cols;
  std::vector<std::vector<double>> maps(n_cam, std::vector<double>(n_bev * d, 0.0));
  for (std::size_t k = 0; k < n_cam; ++k) {
    const auto& set = idx.at(0, k);
    for (std::size_t l = 0; l < set.size(); ++l) {
      for (std::size_t i = 0; i < d; ++i) maps[k][set[l] * d + i] = rb.bev_prime(0, k, l, i);
    }
  }
  Tensor<double> out({pv.views, pv.height, pv.width, d});
  for (std::size_t v = 0; v < pv.views; ++v) {
    for (std::size_t row = 0; row < pv.height; ++row) {
      for (std::size_t col = 0; col < pv.width; ++col) {
        std::vector<double> q(d);
        for (std::size_t i = 0; i < d; ++i) q[i] = pv.queries(v, row, col, i);
        const Vec2 c{(col + 0.5) / static_cast<double>(pv.width),
                     (row + 0.5) / static_cast<double>(pv.height)};
        const auto hits = nearest(rb, 0, v, c, n_ref);
        std::vector<double> acc(d, 0.0);
        if (hits.empty()) {
          acc = q;
        } else {
          const auto& set = idx.at(0, v);
          const std::size_t q_star = set[static_cast<std::size_t>(hits[0].index)];
          std::vector<std::size_t> vhit;
          for (std::size_t k = 0; k < n_cam; ++k) {
            const auto& s = idx.at(0, k);
            if (std::find(s.begin(), s.end(), q_star) != s.end()) vhit.push_back(k);
          }
          for (std::size_t k : vhit) {
            for (const auto& hit : hits) {
              const std::size_t cell = set[static_cast<std::size_t>(hit.index)];
              const Vec2 ref{(cell % cols + 0.5) / static_cast<double>(cols),
                             (cell / cols + 0.5) / static_cast<double>(rows)};
              const auto o = deform_attn(q, ref, maps[k], rows, cols, p);
              for (std::size_t i = 0; i < d; ++i) acc[i] += o[i] / static_cast<double>(vhit.size());
            }
          }
        }
        for (std::size_t i = 0; i < d; ++i) out(v, row, col, i) = acc[i];
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite differences

struct FdResult {
  double max_rel = 0.0;
  std::size_t worst = 0;
};

// Central differences, error |a - n| / max(|a|, |n|, floor) per component.
inline FdResult central_difference(const std::function<double(const std::vector<double>&)>& f,
                                   std::vector<double> x, const std::vector<double>& analytic,
                                   double step = 1e-5, double floor = 1e-6) {
  FdResult r;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + step;
    const double fp = f(x);
    x[i] = x0 - step;
    const double fm = f(x);
    x[i] = x0;
    const double num = (fp - fm) / (2.0 * step);
    const double err =
        std::abs(analytic[i] - num) / std::max({std::abs(analytic[i]), std::abs(num), floor});
    if (err > r.max_rel) {
      r.max_rel = err;
      r.worst = i;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Detection AP

// Precision/recall enumeration over a score-ranked TP/FP list with a
// 101-point upper envelope.
inline double ap(const std::vector<bool>& tp, std::size_t n_gt) {
  std::vector<std::pair<double, double>> pr;  // (recall, precision)
  std::size_t hits = 0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    hits += tp[i];
    pr.emplace_back(static_cast<double>(hits) / n_gt, static_cast<double>(hits) / (i + 1));
  }
  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double level = k / 100.0;
    double best = 0.0;
    for (const auto& [rec, prec] : pr) {
      if (rec >= level) best = std::max(best, prec);
    }
    sum += best;
  }
  return sum / 101.0;
}

inline double mean_ap(const rsd::DetectionSet& set, const std::vector<double>& thresholds) {
  std::set<std::string> cats;
  for (const auto& f : set) {
    for (const auto& g : f.ground_truth) cats.insert(g.category);
  }
  double total = 0.0;
  for (const auto& cat : cats) {
    for (double t : thresholds) {
      // (score, frame, index) sorted by descending score, stable.
      std::vector<std::tuple<double, std::size_t, std::size_t>> preds;
      std::size_t n_gt = 0;
      for (std::size_t f = 0; f < set.size(); ++f) {
        for (const auto& g : set[f].ground_truth) n_gt += g.category == cat;
        for (std::size_t i = 0; i < set[f].predictions.size(); ++i) {
          if (set[f].predictions[i].category == cat) {
            preds.emplace_back(set[f].predictions[i].score, f, i);
          }
        }
      }
      std::stable_sort(preds.begin(), preds.end(), [](const auto& a, const auto& b) {
        return std::get<0>(a) > std::get<0>(b);
      });
      std::map<std::pair<std::size_t, std::size_t>, bool> used;
      std::vector<bool> tp;
      for (const auto& [score, f, i] : preds) {
        const auto& p = set[f].predictions[i];
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_g = 0;
        bool found = false;
        for (std::size_t g = 0; g < set[f].ground_truth.size(); ++g) {
          const auto& gt = set[f].ground_truth[g];
          if (gt.category != cat || used[{f, g}]) continue;
          const double dist = std::hypot(p.position.x - gt.position.x,
                                         p.position.y - gt.position.y);
          if (dist < best) {
            best = dist;
            best_g = g;
            found = true;
          }
        }
        const bool hit = found && best < t;
        if (hit) used[{f, best_g}] = true;
        tp.push_back(hit);
      }
      total += ap(tp, n_gt);
    }
  }
  return total / static_cast<double>(cats.size() * thresholds.size());
}

// ---------------------------------------------------------------------------
// Rectangles

inline std::array<Vec2, 4> corners(const rsd::OrientedRect& r) {
  const double c = std::cos(r.yaw), s = std::sin(r.yaw);
  std::array<Vec2, 4> out;
  const double sx[4] = {0.5, 0.5, -0.5, -0.5}, sy[4] = {0.5, -0.5, -0.5, 0.5};
  for (int i = 0; i < 4; ++i) {
    const double a = sx[i] * r.length, b = sy[i] * r.width;
    out[i] = {r.center.x + a * c - b * s, r.center.y + a * s + b * c};
  }
  return out;
}

inline bool contains(const rsd::OrientedRect& r, Vec2 p) {
  const double dx = p.x - r.center.x, dy = p.y - r.center.y;
  const double c = std::cos(r.yaw), s = std::sin(r.yaw);
  return std::abs(dx * c + dy * s) <= 0.5 * r.length &&
         std::abs(-dx * s + dy * c) <= 0.5 * r.width;
}

// Overlap decided by sampling each boundary densely (corners included) and
// testing the samples for containment in the other rectangle.
inline bool sampled_overlap(const rsd::OrientedRect& a, const rsd::OrientedRect& b,
                            int per_edge = 4000) {
  auto probe = [per_edge](const rsd::OrientedRect& from, const rsd::OrientedRect& into) {
    const auto c = corners(from);
    for (int e = 0; e < 4; ++e) {
      const Vec2 p0 = c[e], p1 = c[(e + 1) % 4];
      for (int i = 0; i < per_edge; ++i) {
        const double t = static_cast<double>(i) / per_edge;
        if (contains(into, {p0.x + t * (p1.x - p0.x), p0.y + t * (p1.y - p0.y)})) return true;
      }
    }
    return false;
  };
  return probe(a, b) || probe(b, a);
}

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double t = std::clamp(((p.x - a.x) * vx + (p.y - a.y) * vy) / (vx * vx + vy * vy), 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy));
}

// Smallest distance from a vertex of either rectangle to an edge of the
// other; near zero means the pair is at (or crossing) tangency.
inline double tangency_distance(const rsd::OrientedRect& a, const rsd::OrientedRect& b) {
  double best = std::numeric_limits<double>::infinity();
  auto scan = [&](const rsd::OrientedRect& from, const rsd::OrientedRect& to) {
    const auto cf = corners(from), ct = corners(to);
    for (const auto& p : cf) {
      for (int e = 0; e < 4; ++e) {
        best = std::min(best, point_segment_distance(p, ct[e], ct[(e + 1) % 4]));
      }
    }
  };
  scan(a, b);
  scan(b, a);
  return best;
}

}  // namespace oracle
