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

#include "rsd/riskhead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "rsd/errors.hpp"

namespace rsd {

// ---------------------------------------------------------------------------
// Query grid and parameters

Vec2 PvQueryGrid::center(std::size_t index) const {
  const std::size_t row = index / width, col = index % width;
  return {(static_cast<double>(col) + 0.5) / static_cast<double>(width),
          (static_cast<double>(row) + 0.5) / static_cast<double>(height)};
}

Tensor<double> PvQueryGrid::centers(std::size_t batch) const {
  Tensor<double> out({batch, views, per_view(), 2});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t v = 0; v < views; ++v) {
      for (std::size_t i = 0; i < per_view(); ++i) {
        const Vec2 c = center(i);
        out(b, v, i, 0) = c.x;
        out(b, v, i, 1) = c.y;
      }
    }
  }
  return out;
}

void PvQueryGrid::validate() const {
  if (views == 0 || height == 0 || width == 0 || embed_dim == 0) {
    throw ValidationError("PV query grid dimensions must be positive");
  }
  const std::vector<std::size_t> expect{views, height, width, embed_dim};
  if (queries.shape() != expect) {
    throw ValidationError("PV queries must be [views, height, width, d]");
  }
}

DeformAttnParams DeformAttnParams::init(std::size_t d, std::size_t heads,
                                        std::size_t points) {
  DeformAttnParams p;
  p.embed_dim = d;
  p.n_heads = heads;
  p.n_points = points;
  p.offset_w = Tensor<double>({heads * points * 2, d});
  p.offset_b.assign(heads * points * 2, 0.0);
  p.attn_w = Tensor<double>({heads * points, d});
  p.attn_b.assign(heads * points, 0.0);
  p.value_w = Tensor<double>({d, d});
  p.output_w = Tensor<double>({d, d});
  for (std::size_t i = 0; i < d; ++i) {
    p.value_w(i, i) = 1.0;
    p.output_w(i, i) = 1.0;
  }
  p.value_b.assign(d, 0.0);
  p.output_b.assign(d, 0.0);
  p.validate();
  return p;
}

DeformAttnParams DeformAttnParams::zeros_like(const DeformAttnParams& like) {
  DeformAttnParams p = like;
  p.offset_w.fill(0.0);
  p.attn_w.fill(0.0);
  p.value_w.fill(0.0);
  p.output_w.fill(0.0);
  std::fill(p.offset_b.begin(), p.offset_b.end(), 0.0);
  std::fill(p.attn_b.begin(), p.attn_b.end(), 0.0);
  std::fill(p.value_b.begin(), p.value_b.end(), 0.0);
  std::fill(p.output_b.begin(), p.output_b.end(), 0.0);
  return p;
}

std::size_t DeformAttnParams::parameter_count() const {
  return offset_w.size() + offset_b.size() + attn_w.size() + attn_b.size() +
         value_w.size() + value_b.size() + output_w.size() + output_b.size();
}

std::vector<double> DeformAttnParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  auto add = [&](std::span<const double> s) { flat.insert(flat.end(), s.begin(), s.end()); };
  add(offset_w.data());
  add(offset_b);
  add(attn_w.data());
  add(attn_b);
  add(value_w.data());
  add(value_b);
  add(output_w.data());
  add(output_b);
  return flat;
}

void DeformAttnParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw InternalError("flat parameter vector has the wrong length");
  }
  std::size_t pos = 0;
  auto take = [&](std::span<double> dst) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), dst.size(), dst.begin());
    pos += dst.size();
  };
  take(offset_w.data());
  take(offset_b);
  take(attn_w.data());
  take(attn_b);
  take(value_w.data());
  take(value_b);
  take(output_w.data());
  take(output_b);
}

void DeformAttnParams::validate() const {
  const std::size_t d = embed_dim, hp = n_heads * n_points;
  if (d == 0 || n_heads == 0 || n_points == 0) {
    throw ValidationError("attention dimensions must be positive");
  }
  if (d % n_heads != 0) {
    throw ValidationError("embedding width must be divisible by the head count");
  }
  const bool ok =
      offset_w.shape() == std::vector<std::size_t>{hp * 2, d} &&
      offset_b.size() == hp * 2 &&
      attn_w.shape() == std::vector<std::size_t>{hp, d} && attn_b.size() == hp &&
      value_w.shape() == std::vector<std::size_t>{d, d} && value_b.size() == d &&
      output_w.shape() == std::vector<std::size_t>{d, d} && output_b.size() == d;
  if (!ok) throw ValidationError("attention parameter shapes are inconsistent");
  if (!std::isfinite(offset_scale)) throw ValidationError("offset scale must be finite");
}

// ---------------------------------------------------------------------------
// Bilinear sampling

namespace {

struct Taps {
  std::array<std::ptrdiff_t, 4> x{};
  std::array<std::ptrdiff_t, 4> y{};
  std::array<double, 4> w{};
  std::array<double, 4> dwdx{};  // w.r.t. normalized loc.x
  std::array<double, 4> dwdy{};
  std::array<bool, 4> inside{};
};

Taps bilinear_taps(std::size_t height, std::size_t width, Vec2 loc) {
  Taps t;
  const double px = loc.x * static_cast<double>(width) - 0.5;
  const double py = loc.y * static_cast<double>(height) - 0.5;
  if (!std::isfinite(px) || !std::isfinite(py) || px <= -1.0 || py <= -1.0 ||
      px >= static_cast<double>(width) || py >= static_cast<double>(height)) {
    return t;  // every neighbour is padding
  }
  const double x0 = std::floor(px), y0 = std::floor(py);
  const double fx = px - x0, fy = py - y0;
  const double sx = static_cast<double>(width), sy = static_cast<double>(height);
  const auto ix = static_cast<std::ptrdiff_t>(x0);
  const auto iy = static_cast<std::ptrdiff_t>(y0);
  t.x = {ix, ix + 1, ix, ix + 1};
  t.y = {iy, iy, iy + 1, iy + 1};
  t.w = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  t.dwdx = {-(1 - fy) * sx, (1 - fy) * sx, -fy * sx, fy * sx};
  t.dwdy = {-(1 - fx) * sy, -fx * sy, (1 - fx) * sy, fx * sy};
  for (int n = 0; n < 4; ++n) {
    t.inside[n] = t.x[n] >= 0 && t.y[n] >= 0 &&
                  t.x[n] < static_cast<std::ptrdiff_t>(width) &&
                  t.y[n] < static_cast<std::ptrdiff_t>(height);
  }
  return t;
}

// Raw (unprojected) bilinear sample plus the sum of in-bounds tap weights,
// optionally with their derivatives w.r.t. the location.
struct RawSample {
  std::vector<double> value;
  double weight_sum = 0.0;
  std::vector<double> d_dx, d_dy;
  double dws_dx = 0.0, dws_dy = 0.0;
};

void sample_raw(const FeatureMap& map, Vec2 loc, bool with_grad, RawSample& out) {
  const std::size_t c = map.channels;
  out.value.assign(c, 0.0);
  out.weight_sum = 0.0;
  if (with_grad) {
    out.d_dx.assign(c, 0.0);
    out.d_dy.assign(c, 0.0);
    out.dws_dx = out.dws_dy = 0.0;
  }
  const Taps t = bilinear_taps(map.height, map.width, loc);
  for (int n = 0; n < 4; ++n) {
    if (!t.inside[n]) continue;
    const double* px = map.pixel(static_cast<std::size_t>(t.y[n]),
                                 static_cast<std::size_t>(t.x[n]));
    for (std::size_t i = 0; i < c; ++i) out.value[i] += t.w[n] * px[i];
    out.weight_sum += t.w[n];
    if (with_grad) {
      for (std::size_t i = 0; i < c; ++i) {
        out.d_dx[i] += t.dwdx[n] * px[i];
        out.d_dy[i] += t.dwdy[n] * px[i];
      }
      out.dws_dx += t.dwdx[n];
      out.dws_dy += t.dwdy[n];
    }
  }
}

void check_map(const FeatureMap& map) {
  if (map.data.size() != map.height * map.width * map.channels) {
    throw InternalError("feature map storage does not match its shape");
  }
}

}  // namespace

std::vector<double> bilinear_sample(const FeatureMap& map, Vec2 loc) {
  check_map(map);
  RawSample s;
  sample_raw(map, loc, false, s);
  return s.value;
}

BilinearJacobian bilinear_sample_jacobian(const FeatureMap& map, Vec2 loc) {
  check_map(map);
  RawSample s;
  sample_raw(map, loc, true, s);
  return {std::move(s.d_dx), std::move(s.d_dy)};
}

// ---------------------------------------------------------------------------
// Deformable attention

namespace {

// Offsets and softmax weights depend only on the query, so they are
// computed once and reused across reference points and value maps.
struct PreparedQuery {
  std::vector<double> offsets;  // [H*P*2], already scaled
  std::vector<double> weights;  // [H*P]
};

PreparedQuery prepare_query(std::span<const double> q, const DeformAttnParams& p) {
  const std::size_t d = p.embed_dim, hp = p.n_heads * p.n_points;
  if (q.size() != d) throw InternalError("query width does not match parameters");
  PreparedQuery pq;
  pq.offsets.resize(hp * 2);
  for (std::size_t r = 0; r < hp * 2; ++r) {
    double s = p.offset_b[r];
    const auto row = p.offset_w.slice(r);
    for (std::size_t i = 0; i < d; ++i) s += row[i] * q[i];
    pq.offsets[r] = p.offset_scale * s;
  }
  pq.weights.resize(hp);
  for (std::size_t h = 0; h < p.n_heads; ++h) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < p.n_points; ++j) {
      const std::size_t r = h * p.n_points + j;
      double s = p.attn_b[r];
      const auto row = p.attn_w.slice(r);
      for (std::size_t i = 0; i < d; ++i) s += row[i] * q[i];
      pq.weights[r] = s;
      mx = std::max(mx, s);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < p.n_points; ++j) {
      double& w = pq.weights[h * p.n_points + j];
      w = std::exp(w - mx);
      z += w;
    }
    for (std::size_t j = 0; j < p.n_points; ++j) pq.weights[h * p.n_points + j] /= z;
  }
  return pq;
}

// Concatenated head outputs before the output projection.
std::vector<double> attend_heads(const PreparedQuery& pq, Vec2 ref,
                                 const FeatureMap& values,
                                 const DeformAttnParams& p) {
  const std::size_t d = p.embed_dim, hd = p.head_dim();
  std::vector<double> concat(d, 0.0);
  RawSample s;
  for (std::size_t h = 0; h < p.n_heads; ++h) {
    for (std::size_t j = 0; j < p.n_points; ++j) {
      const std::size_t hj = h * p.n_points + j;
      const Vec2 loc{ref.x + pq.offsets[hj * 2], ref.y + pq.offsets[hj * 2 + 1]};
      sample_raw(values, loc, false, s);
      if (s.weight_sum == 0.0) continue;
      const double a = pq.weights[hj];
      for (std::size_t r = 0; r < hd; ++r) {
        const std::size_t row = h * hd + r;
        double v = p.value_b[row] * s.weight_sum;
        const auto wrow = p.value_w.slice(row);
        for (std::size_t i = 0; i < d; ++i) v += wrow[i] * s.value[i];
        concat[row] += a * v;
      }
    }
  }
  return concat;
}

void project_output(const std::vector<double>& concat, const DeformAttnParams& p,
                    std::vector<double>& out, double scale) {
  const std::size_t d = p.embed_dim;
  for (std::size_t r = 0; r < d; ++r) {
    double v = p.output_b[r];
    const auto row = p.output_w.slice(r);
    for (std::size_t i = 0; i < d; ++i) v += row[i] * concat[i];
    out[r] += scale * v;
  }
}

}  // namespace

Tensor<double> deform_attn_weights(std::span<const double> q,
                                   const DeformAttnParams& p) {
  PreparedQuery pq = prepare_query(q, p);
  return Tensor<double>({p.n_heads, p.n_points}, std::move(pq.weights));
}

Tensor<double> deform_attn_offsets(std::span<const double> q,
                                   const DeformAttnParams& p) {
  PreparedQuery pq = prepare_query(q, p);
  return Tensor<double>({p.n_heads, p.n_points, 2}, std::move(pq.offsets));
}

std::vector<double> deform_attn(std::span<const double> q, Vec2 ref,
                                const FeatureMap& values,
                                const DeformAttnParams& p) {
  check_map(values);
  if (values.channels != p.embed_dim) {
    throw InternalError("value map width does not match parameters");
  }
  const PreparedQuery pq = prepare_query(q, p);
  std::vector<double> out(p.embed_dim, 0.0);
  project_output(attend_heads(pq, ref, values, p), p, out, 1.0);
  return out;
}

DeformAttnGrads deform_attn_backward(std::span<const double> q, Vec2 ref,
                                     const FeatureMap& values,
                                     const DeformAttnParams& p,
                                     std::span<const double> grad_out) {
  check_map(values);
  const std::size_t d = p.embed_dim, hd = p.head_dim(), hp = p.n_heads * p.n_points;
  if (values.channels != d || grad_out.size() != d) {
    throw InternalError("deform_attn_backward shape mismatch");
  }
  const PreparedQuery pq = prepare_query(q, p);

  // Forward pass, keeping what the backward pass needs.
  std::vector<RawSample> samples(hp);
  std::vector<std::vector<double>> projected(hp, std::vector<double>(hd, 0.0));
  std::vector<double> concat(d, 0.0);
  for (std::size_t h = 0; h < p.n_heads; ++h) {
    for (std::size_t j = 0; j < p.n_points; ++j) {
      const std::size_t hj = h * p.n_points + j;
      const Vec2 loc{ref.x + pq.offsets[hj * 2], ref.y + pq.offsets[hj * 2 + 1]};
      sample_raw(values, loc, true, samples[hj]);
      for (std::size_t r = 0; r < hd; ++r) {
        const std::size_t row = h * hd + r;
        double v = p.value_b[row] * samples[hj].weight_sum;
        const auto wrow = p.value_w.slice(row);
        for (std::size_t i = 0; i < d; ++i) v += wrow[i] * samples[hj].value[i];
        projected[hj][r] = v;
        concat[row] += pq.weights[hj] * v;
      }
    }
  }

  DeformAttnGrads g{std::vector<double>(d, 0.0), {0.0, 0.0},
                    DeformAttnParams::zeros_like(p)};

  // out = W_o concat + b_o
  std::vector<double> g_concat(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    g.params.output_b[r] = grad_out[r];
    for (std::size_t i = 0; i < d; ++i) {
      g.params.output_w(r, i) = grad_out[r] * concat[i];
      g_concat[i] += p.output_w(r, i) * grad_out[r];
    }
  }

  std::vector<double> g_weights(hp, 0.0);
  std::vector<double> g_offsets(hp * 2, 0.0);
  std::vector<double> g_raw(d);
  for (std::size_t h = 0; h < p.n_heads; ++h) {
    for (std::size_t j = 0; j < p.n_points; ++j) {
      const std::size_t hj = h * p.n_points + j;
      const RawSample& s = samples[hj];
      const double a = pq.weights[hj];
      std::fill(g_raw.begin(), g_raw.end(), 0.0);
      double g_wsum = 0.0;
      for (std::size_t r = 0; r < hd; ++r) {
        const std::size_t row = h * hd + r;
        g_weights[hj] += g_concat[row] * projected[hj][r];
        const double g_proj = a * g_concat[row];
        g.params.value_b[row] += g_proj * s.weight_sum;
        g_wsum += g_proj * p.value_b[row];
        for (std::size_t i = 0; i < d; ++i) {
          g.params.value_w(row, i) += g_proj * s.value[i];
          g_raw[i] += p.value_w(row, i) * g_proj;
        }
      }
      double gx = g_wsum * s.dws_dx, gy = g_wsum * s.dws_dy;
      for (std::size_t i = 0; i < d; ++i) {
        gx += g_raw[i] * s.d_dx[i];
        gy += g_raw[i] * s.d_dy[i];
      }
      g.ref.x += gx;
      g.ref.y += gy;
      g_offsets[hj * 2] = gx;
      g_offsets[hj * 2 + 1] = gy;
    }
  }

  // Offsets: o = scale * (W_off q + b_off).
  for (std::size_t r = 0; r < hp * 2; ++r) {
    const double go = p.offset_scale * g_offsets[r];
    g.params.offset_b[r] = go;
    for (std::size_t i = 0; i < d; ++i) {
      g.params.offset_w(r, i) = go * q[i];
      g.query[i] += p.offset_w(r, i) * go;
    }
  }

  // Per-head softmax.
  for (std::size_t h = 0; h < p.n_heads; ++h) {
    double dot = 0.0;
    for (std::size_t j = 0; j < p.n_points; ++j) {
      const std::size_t hj = h * p.n_points + j;
      dot += pq.weights[hj] * g_weights[hj];
    }
    for (std::size_t j = 0; j < p.n_points; ++j) {
      const std::size_t hj = h * p.n_points + j;
      const double gz = pq.weights[hj] * (g_weights[hj] - dot);
      g.params.attn_b[hj] = gz;
      for (std::size_t i = 0; i < d; ++i) {
        g.params.attn_w(hj, i) = gz * q[i];
        g.query[i] += p.attn_w(hj, i) * gz;
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Nearest-neighbour matching

NnMatch nn_match(const Tensor<double>& ref_cam, const RebatchedQueries& rb,
                 std::size_t k_nearest) {
  if (k_nearest == 0) throw ValidationError("nn_match needs k >= 1");
  if (ref_cam.rank() != 4 || ref_cam.dim(3) != 2 || ref_cam.dim(0) != rb.batch() ||
      ref_cam.dim(1) != rb.cameras()) {
    throw InternalError("camera reference points must be [B, N_cam, Q, 2]");
  }
  const std::size_t batch = rb.batch(), n_cam = rb.cameras(), n_q = ref_cam.dim(2),
                    depth = rb.depth();
  NnMatch m{Tensor<std::int64_t>({batch, n_cam, n_q, k_nearest}, -1),
            Tensor<double>({batch, n_cam, n_q, k_nearest},
                           std::numeric_limits<double>::infinity()),
            Tensor<double>({batch, n_cam, n_q, k_nearest, 2})};

  struct Cand {
    double dist;
    std::size_t l;
    std::size_t d;
  };
  std::vector<Cand> best;
  best.reserve(k_nearest + 1);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < n_cam; ++k) {
      const std::size_t len = rb.lengths(b, k);
      const auto pts = rb.ref2d_prime.slice(b, k);
      for (std::size_t q = 0; q < n_q; ++q) {
        const double xc = ref_cam(b, k, q, 0), yc = ref_cam(b, k, q, 1);
        best.clear();
        for (std::size_t l = 0; l < len; ++l) {
          double min_sq = std::numeric_limits<double>::infinity();
          std::size_t min_d = 0;
          for (std::size_t d = 0; d < depth; ++d) {
            const double dx = xc - pts[(l * depth + d) * 2];
            const double dy = yc - pts[(l * depth + d) * 2 + 1];
            const double sq = dx * dx + dy * dy;
            if (sq < min_sq) {
              min_sq = sq;
              min_d = d;
            }
          }
          const double dist = std::sqrt(min_sq);
          if (best.size() == k_nearest && !(dist < best.back().dist)) continue;
          // Later candidates lose ties, so insert after any equal distances.
          auto it = std::upper_bound(best.begin(), best.end(), dist,
                                     [](double v, const Cand& c) { return v < c.dist; });
          best.insert(it, Cand{dist, l, min_d});
          if (best.size() > k_nearest) best.pop_back();
        }
        for (std::size_t r = 0; r < best.size(); ++r) {
          m.index(b, k, q, r) = static_cast<std::int64_t>(best[r].l);
          m.distance(b, k, q, r) = best[r].dist;
          m.point(b, k, q, r, 0) = pts[(best[r].l * depth + best[r].d) * 2];
          m.point(b, k, q, r, 1) = pts[(best[r].l * depth + best[r].d) * 2 + 1];
        }
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Risk-head aggregation

RhaResult rha_forward(const PvQueryGrid& pv, const RebatchedQueries& rb,
                      const VisibleIndexSets& idx, BevLattice lattice,
                      const DeformAttnParams& params, const RhaOptions& options) {
  pv.validate();
  params.validate();
  const std::size_t n_cam = rb.cameras(), d = params.embed_dim,
                    n_bev = lattice.rows * lattice.cols, b = options.batch;
  if (pv.views != n_cam) throw ValidationError("PV views must equal the camera count");
  if (pv.embed_dim != d || rb.embed_dim() != d) {
    throw ValidationError("PV, BEV and attention widths must agree");
  }
  if (b >= rb.batch()) throw ValidationError("batch index out of range");
  if (options.n_ref == 0) throw ValidationError("n_ref must be at least 1");

  const Tensor<double> value_maps = scatter_back(rb, idx, n_bev);
  std::vector<std::vector<std::uint8_t>> member(n_cam, std::vector<std::uint8_t>(n_bev, 0));
  for (std::size_t k = 0; k < n_cam; ++k) {
    for (std::size_t q : idx.at(b, k)) member[k][q] = 1;
  }
  std::vector<FeatureMap> maps;
  for (std::size_t k = 0; k < n_cam; ++k) {
    maps.push_back({lattice.rows, lattice.cols, d, value_maps.slice(b, k)});
  }

  const NnMatch nn = nn_match(pv.centers(rb.batch()), rb, options.n_ref);

  RhaResult res{Tensor<double>({pv.views, pv.height, pv.width, d}),
                Tensor<std::uint8_t>({pv.views, pv.per_view()})};
  std::vector<double> acc(d);
  std::vector<std::size_t> hits;
  for (std::size_t v = 0; v < n_cam; ++v) {
    const auto& set = idx.at(b, v);
    for (std::size_t i = 0; i < pv.per_view(); ++i) {
      const std::size_t row = i / pv.width, col = i % pv.width;
      const auto query = pv.queries.slice(v, row, col);
      auto out = res.features.slice(v, row, col);
      if (!nn.matched(b, v, i)) {
        std::copy(query.begin(), query.end(), out.begin());
        continue;
      }
      const std::size_t q_star = set[static_cast<std::size_t>(nn.index(b, v, i, std::size_t{0}))];
      hits.clear();
      for (std::size_t k = 0; k < n_cam; ++k) {
        if (member[k][q_star]) hits.push_back(k);
      }
      const PreparedQuery pq = prepare_query(query, params);
      std::fill(acc.begin(), acc.end(), 0.0);
      const double inv_hits = 1.0 / static_cast<double>(hits.size());
      for (std::size_t k : hits) {
        for (std::size_t j = 0; j < options.n_ref; ++j) {
          const std::int64_t l = nn.index(b, v, i, j);
          if (l < 0) break;
          const Vec2 ref = lattice.center(set[static_cast<std::size_t>(l)]);
          project_output(attend_heads(pq, ref, maps[k], params), params, acc, inv_hits);
        }
      }
      std::copy(acc.begin(), acc.end(), out.begin());
      res.hit_views(v, i) = static_cast<std::uint8_t>(hits.size());
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Decoding

RiskPrediction risk_decode(const Tensor<double>& pv_features,
                           const RiskDecoder& decoder) {
  if (pv_features.rank() != 4) {
    throw ValidationError("PV features must be [views, height, width, d]");
  }
  const std::size_t views = pv_features.dim(0), height = pv_features.dim(1),
                    width = pv_features.dim(2), d = pv_features.dim(3);
  if (decoder.weight.size() != d) {
    throw ValidationError("decoder weight width does not match features");
  }
  RiskPrediction pred{Tensor<double>({views, height, width}), {}};
  for (std::size_t v = 0; v < views; ++v) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const auto f = pv_features.slice(v, y, x);
        double z = decoder.bias;
        for (std::size_t i = 0; i < d; ++i) z += decoder.weight[i] * f[i];
        pred.pv_risk_map(v, y, x) = std::clamp(1.0 / (1.0 + std::exp(-z)), 0.0, 1.0);
      }
    }
  }

  std::vector<std::uint8_t> seen(height * width);
  std::vector<std::size_t> stack;
  for (std::size_t v = 0; v < views; ++v) {
    std::fill(seen.begin(), seen.end(), 0);
    for (std::size_t start = 0; start < height * width; ++start) {
      if (seen[start] || !(pred.pv_risk_map(v, start / width, start % width) >
                           decoder.threshold)) {
        continue;
      }
      std::size_t x1 = width, y1 = height, x2 = 0, y2 = 0;
      double peak = 0.0;
      stack.assign(1, start);
      seen[start] = 1;
      while (!stack.empty()) {
        const std::size_t cur = stack.back();
        stack.pop_back();
        const std::size_t cy = cur / width, cx = cur % width;
        x1 = std::min(x1, cx);
        x2 = std::max(x2, cx);
        y1 = std::min(y1, cy);
        y2 = std::max(y2, cy);
        peak = std::max(peak, pred.pv_risk_map(v, cy, cx));
        auto visit = [&](std::size_t ny, std::size_t nx) {
          const std::size_t n = ny * width + nx;
          if (!seen[n] && pred.pv_risk_map(v, ny, nx) > decoder.threshold) {
            seen[n] = 1;
            stack.push_back(n);
          }
        };
        if (cx > 0) visit(cy, cx - 1);
        if (cx + 1 < width) visit(cy, cx + 1);
        if (cy > 0) visit(cy - 1, cx);
        if (cy + 1 < height) visit(cy + 1, cx);
      }
      RiskObject obj;
      obj.view = v;
      obj.bbox = {static_cast<double>(x1) / static_cast<double>(width),
                  static_cast<double>(y1) / static_cast<double>(height),
                  static_cast<double>(x2 + 1) / static_cast<double>(width),
                  static_cast<double>(y2 + 1) / static_cast<double>(height)};
      obj.risk_score = peak;
      pred.objects.push_back(obj);
    }
  }
  std::stable_sort(pred.objects.begin(), pred.objects.end(),
                   [](const RiskObject& a, const RiskObject& b) {
                     return a.risk_score > b.risk_score;
                   });
  for (std::size_t r = 0; r < pred.objects.size(); ++r) pred.objects[r].rank = r;
  return pred;
}

GrayImage risk_map_image(const RiskPrediction& pred, std::size_t view) {
  const std::size_t height = pred.pv_risk_map.dim(1), width = pred.pv_risk_map.dim(2);
  GrayImage img(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      img.at(x, y) = static_cast<std::uint8_t>(
          std::lround(255.0 * std::clamp(pred.pv_risk_map(view, y, x), 0.0, 1.0)));
    }
  }
  return img;
}

std::string risk_objects_to_json(const std::vector<RiskObject>& objects) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& o : objects) {
    arr.push_back({{"view", o.view},
                   {"bbox", o.bbox},
                   {"risk_score", o.risk_score},
                   {"rank", o.rank}});
  }
  return dump_json(arr);
}

// ---------------------------------------------------------------------------
// Gradient checking

GradCheckResult gradcheck(const std::function<double(std::span<const double>)>& f,
                          std::span<const double> x, std::span<const double> analytic,
                          double step, double floor) {
  if (x.size() != analytic.size()) {
    throw InternalError("gradcheck: gradient length does not match input");
  }
  GradCheckResult res;
  std::vector<double> probe(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double fp = f(probe);
    probe[i] = x[i] - step;
    const double fm = f(probe);
    probe[i] = x[i];
    const double numeric = (fp - fm) / (2.0 * step);
    const double a = analytic[i];
    if (!std::isfinite(a) || !std::isfinite(numeric)) {
      res.finite = false;
      res.max_rel_error = std::numeric_limits<double>::infinity();
      res.worst_index = i;
      res.analytic = a;
      res.numeric = numeric;
      return res;
    }
    const double err =
        std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    if (err > res.max_rel_error) {
      res.max_rel_error = err;
      res.worst_index = i;
      res.analytic = a;
      res.numeric = numeric;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Model container

void RiskHeadModel::validate() const {
  pv.validate();
  attn.validate();
  if (pv.embed_dim != attn.embed_dim || decoder.weight.size() != attn.embed_dim) {
    throw ValidationError("risk head widths disagree");
  }
  if (n_ref == 0) throw ValidationError("n_ref must be at least 1");
  if (!(decoder.threshold >= 0.0 && decoder.threshold <= 1.0)) {
    throw ValidationError("decode threshold must lie in [0, 1]");
  }
}

RiskHeadModel init_risk_head(const RiskHeadShape& s, std::uint64_t seed) {
  if (s.risk_channel >= s.embed_dim) {
    throw ValidationError("risk channel outside the embedding");
  }
  RiskHeadModel m;
  m.pv.views = s.views;
  m.pv.height = s.pv_height;
  m.pv.width = s.pv_width;
  m.pv.embed_dim = s.embed_dim;
  m.pv.queries = Tensor<double>({s.views, s.pv_height, s.pv_width, s.embed_dim});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.02);
  for (double& v : m.pv.queries.data()) v = noise(rng);
  m.attn = DeformAttnParams::init(s.embed_dim, s.n_heads, s.n_points);
  m.n_ref = s.n_ref;
  m.decoder.weight.assign(s.embed_dim, 0.0);
  // The head sums n_ref samples, so the gain is divided back out: a fully
  // risky neighbourhood (channel value 1) maps to logit +6.
  m.decoder.weight[s.risk_channel] = 12.0 / static_cast<double>(s.n_ref);
  m.decoder.bias = -6.0;
  m.decoder.threshold = s.threshold;
  m.validate();
  return m;
}

TensorBundle risk_head_to_bundle(const RiskHeadModel& m) {
  TensorBundle b;
  auto vec = [](const std::vector<double>& v) {
    return Tensor<double>({v.size()}, v);
  };
  b.put("pv_queries", m.pv.queries);
  b.put("offset_w", m.attn.offset_w);
  b.put("offset_b", vec(m.attn.offset_b));
  b.put("attn_w", m.attn.attn_w);
  b.put("attn_b", vec(m.attn.attn_b));
  b.put("value_w", m.attn.value_w);
  b.put("value_b", vec(m.attn.value_b));
  b.put("output_w", m.attn.output_w);
  b.put("output_b", vec(m.attn.output_b));
  b.put("decoder_w", vec(m.decoder.weight));
  b.put("decoder_b", Tensor<double>({1}, std::vector<double>{m.decoder.bias}));
  b.meta = {{"views", m.pv.views},
            {"pv_height", m.pv.height},
            {"pv_width", m.pv.width},
            {"embed_dim", m.attn.embed_dim},
            {"n_heads", m.attn.n_heads},
            {"n_points", m.attn.n_points},
            {"offset_scale", m.attn.offset_scale},
            {"n_ref", m.n_ref},
            {"threshold", m.decoder.threshold}};
  return b;
}

RiskHeadModel risk_head_from_bundle(const TensorBundle& b) {
  RiskHeadModel m;
  try {
    const auto& meta = b.meta;
    m.pv.views = meta.at("views").get<std::size_t>();
    m.pv.height = meta.at("pv_height").get<std::size_t>();
    m.pv.width = meta.at("pv_width").get<std::size_t>();
    m.pv.embed_dim = meta.at("embed_dim").get<std::size_t>();
    m.attn.embed_dim = m.pv.embed_dim;
    m.attn.n_heads = meta.at("n_heads").get<std::size_t>();
    m.attn.n_points = meta.at("n_points").get<std::size_t>();
    m.attn.offset_scale = meta.at("offset_scale").get<double>();
    m.n_ref = meta.at("n_ref").get<std::size_t>();
    m.decoder.threshold = meta.at("threshold").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("risk head parameter sidecar: ") + e.what());
  }
  auto vec = [&](const char* name) {
    const auto& t = b.get(name);
    return std::vector<double>(t.data().begin(), t.data().end());
  };
  m.pv.queries = b.get("pv_queries");
  m.attn.offset_w = b.get("offset_w");
  m.attn.offset_b = vec("offset_b");
  m.attn.attn_w = b.get("attn_w");
  m.attn.attn_b = vec("attn_b");
  m.attn.value_w = b.get("value_w");
  m.attn.value_b = vec("value_b");
  m.attn.output_w = b.get("output_w");
  m.attn.output_b = vec("output_b");
  m.decoder.weight = vec("decoder_w");
  const auto bias = vec("decoder_b");
  if (bias.size() != 1) throw ValidationError("decoder_b must hold one value");
  m.decoder.bias = bias[0];
  m.validate();
  return m;
}

}  // namespace rsd
