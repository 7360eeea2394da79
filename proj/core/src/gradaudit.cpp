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

#include <cmath>
#include <random>

#include "rsd/riskhead.hpp"

namespace rsd {

namespace {

constexpr std::size_t kMapH = 7;
constexpr std::size_t kMapW = 9;
constexpr std::size_t kMapC = 4;
// Minimum distance, in pixels, between a sampling position and a cell
// boundary of the bilinear kernel.
constexpr double kKinkMargin = 1e-3;

bool away_from_kinks(Vec2 loc, std::size_t w, std::size_t h) {
  auto ok = [](double px) {
    const double frac = px - std::floor(px);
    return frac > kKinkMargin && frac < 1.0 - kKinkMargin;
  };
  return ok(loc.x * static_cast<double>(w) - 0.5) && ok(loc.y * static_cast<double>(h) - 0.5);
}

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = nd(rng);
  return v;
}

void keep_worst(GradCheckResult& worst, const GradCheckResult& r) {
  if (!worst.finite) return;
  if (!r.finite || r.max_rel_error > worst.max_rel_error) worst = r;
}

}  // namespace

GradCheckResult audit_bilinear_gradients(std::uint64_t seed, std::size_t points) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.02, 0.98);
  GradCheckResult worst;
  for (std::size_t i = 0; i < points; ++i) {
    const std::vector<double> storage = random_values(rng, kMapH * kMapW * kMapC, 1.0);
    const FeatureMap map{kMapH, kMapW, kMapC, storage};
    const std::vector<double> g = random_values(rng, kMapC, 1.0);
    Vec2 loc;
    do {
      loc = {pos(rng), pos(rng)};
    } while (!away_from_kinks(loc, kMapW, kMapH));

    auto f = [&](std::span<const double> x) {
      const auto out = bilinear_sample(map, {x[0], x[1]});
      double s = 0.0;
      for (std::size_t c = 0; c < kMapC; ++c) s += g[c] * out[c];
      return s;
    };
    const BilinearJacobian jac = bilinear_sample_jacobian(map, loc);
    double gx = 0.0, gy = 0.0;
    for (std::size_t c = 0; c < kMapC; ++c) {
      gx += g[c] * jac.d_dx[c];
      gy += g[c] * jac.d_dy[c];
    }
    const std::vector<double> x{loc.x, loc.y};
    const std::vector<double> analytic{gx, gy};
    keep_worst(worst, gradcheck(f, x, analytic));
  }
  return worst;
}

GradCheckResult audit_deform_gradients(std::uint64_t seed, std::size_t points) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.15, 0.85);
  constexpr std::size_t kDim = kMapC * 2;
  GradCheckResult worst;
  for (std::size_t i = 0; i < points; ++i) {
    const std::vector<double> storage = random_values(rng, kMapH * kMapW * kDim, 1.0);
    const FeatureMap map{kMapH, kMapW, kDim, storage};
    DeformAttnParams p = DeformAttnParams::init(kDim, 2, 3);
    p.offset_scale = 1.0 / 16.0;
    std::vector<double> q, flat;
    Vec2 ref;
    // Redraw until every sampling location clears the kinks.
    for (;;) {
      flat = random_values(rng, p.parameter_count(), 0.3);
      p.assign(flat);
      q = random_values(rng, kDim, 1.0);
      ref = {pos(rng), pos(rng)};
      const Tensor<double> off = deform_attn_offsets(q, p);
      bool ok = true;
      for (std::size_t h = 0; h < p.n_heads && ok; ++h) {
        for (std::size_t k = 0; k < p.n_points && ok; ++k) {
          ok = away_from_kinks({ref.x + off(h, k, std::size_t{0}),
                                ref.y + off(h, k, std::size_t{1})},
                               kMapW, kMapH);
        }
      }
      if (ok) break;
    }
    const std::vector<double> g = random_values(rng, kDim, 1.0);

    std::vector<double> x(q);
    x.push_back(ref.x);
    x.push_back(ref.y);
    x.insert(x.end(), flat.begin(), flat.end());
    auto f = [&](std::span<const double> v) {
      DeformAttnParams pp = p;
      pp.assign(v.subspan(kDim + 2));
      const auto out = deform_attn(v.subspan(0, kDim), {v[kDim], v[kDim + 1]}, map, pp);
      double s = 0.0;
      for (std::size_t c = 0; c < kDim; ++c) s += g[c] * out[c];
      return s;
    };
    const DeformAttnGrads grads = deform_attn_backward(q, ref, map, p, g);
    std::vector<double> analytic(grads.query);
    analytic.push_back(grads.ref.x);
    analytic.push_back(grads.ref.y);
    const auto gp = grads.params.flatten();
    analytic.insert(analytic.end(), gp.begin(), gp.end());
    keep_worst(worst, gradcheck(f, x, analytic));
  }
  return worst;
}

}  // namespace rsd
