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
#include <functional>
#include <span>
#include <vector>

#include "rsd/geometry.hpp"
#include "rsd/io.hpp"
#include "rsd/rebatch.hpp"
#include "rsd/tensor.hpp"

namespace rsd {

// Read-only [height, width, channels] view over contiguous storage.
struct FeatureMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::span<const double> data;

  const double* pixel(std::size_t y, std::size_t x) const {
    return data.data() + (y * width + x) * channels;
  }
};

// Learnable perspective-view queries, one grid per camera view.
struct PvQueryGrid {
  std::size_t views = 6;
  std::size_t height = 80;
  std::size_t width = 45;
  std::size_t embed_dim = 16;
  Tensor<double> queries;  // [views, height, width, d]

  std::size_t per_view() const { return height * width; }
  // Normalized image position of a PV cell centre; index = row * width + col.
  Vec2 center(std::size_t index) const;
  // [batch, views, height*width, 2] camera-space reference positions.
  Tensor<double> centers(std::size_t batch) const;
  void validate() const;
};

// Weights of one deformable-attention block. Rows of offset_w are laid out
// as ((head * n_points + point) * 2 + axis); rows of attn_w as
// (head * n_points + point).
struct DeformAttnParams {
  std::size_t embed_dim = 16;
  std::size_t n_heads = 1;
  std::size_t n_points = 4;
  double offset_scale = 1.0 / 16.0;

  Tensor<double> offset_w;   // [H*P*2, d]
  std::vector<double> offset_b;
  Tensor<double> attn_w;     // [H*P, d]
  std::vector<double> attn_b;
  Tensor<double> value_w;    // [d, d]
  std::vector<double> value_b;
  Tensor<double> output_w;   // [d, d]
  std::vector<double> output_b;

  // Zero offset and weight nets, identity value/output projections.
  static DeformAttnParams init(std::size_t embed_dim, std::size_t n_heads,
                               std::size_t n_points);
  // Same shapes as `like`, every entry zero; used as a gradient container.
  static DeformAttnParams zeros_like(const DeformAttnParams& like);

  std::size_t head_dim() const { return embed_dim / n_heads; }
  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  void validate() const;
};

// out = sum over the four neighbours of the continuous pixel position
// (x * W - 0.5, y * H - 0.5); neighbours outside the map read as zero.
std::vector<double> bilinear_sample(const FeatureMap& map, Vec2 loc);

// d(out)/d(loc): two d-vectors, one per axis.
struct BilinearJacobian {
  std::vector<double> d_dx;
  std::vector<double> d_dy;
};
BilinearJacobian bilinear_sample_jacobian(const FeatureMap& map, Vec2 loc);

// Softmax attention weights [n_heads, n_points] for a query; each head's
// row sums to one.
Tensor<double> deform_attn_weights(std::span<const double> q,
                                   const DeformAttnParams& p);
// Sampling offsets [n_heads, n_points, 2] in normalized units.
Tensor<double> deform_attn_offsets(std::span<const double> q,
                                   const DeformAttnParams& p);

std::vector<double> deform_attn(std::span<const double> q, Vec2 ref,
                                const FeatureMap& values,
                                const DeformAttnParams& p);

struct DeformAttnGrads {
  std::vector<double> query;
  Vec2 ref;
  DeformAttnParams params;
};
// Reverse-mode gradient of <grad_out, deform_attn(q, ref, values, p)>.
DeformAttnGrads deform_attn_backward(std::span<const double> q, Vec2 ref,
                                     const FeatureMap& values,
                                     const DeformAttnParams& p,
                                     std::span<const double> grad_out);

// Nearest rebatched reference for each camera-space query. A candidate's
// distance is the minimum over its height samples; ties go to the smallest
// candidate index. Unmatched slots (camera with no visible queries, or
// fewer than k candidates) hold index -1.
struct NnMatch {
  Tensor<std::int64_t> index;  // [B, N_cam, Q, k]
  Tensor<double> distance;     // [B, N_cam, Q, k]
  Tensor<double> point;        // [B, N_cam, Q, k, 2] closest height sample

  bool matched(std::size_t b, std::size_t cam, std::size_t q) const {
    return index(b, cam, q, std::size_t{0}) >= 0;
  }
};
NnMatch nn_match(const Tensor<double>& ref_cam, const RebatchedQueries& rb,
                 std::size_t k_nearest = 1);

struct BevLattice {
  std::size_t rows = 100;
  std::size_t cols = 100;

  Vec2 center(std::size_t q) const {
    return {(static_cast<double>(q % cols) + 0.5) / static_cast<double>(cols),
            (static_cast<double>(q / cols) + 0.5) / static_cast<double>(rows)};
  }
};

struct RhaOptions {
  std::size_t n_ref = 4;
  std::size_t batch = 0;
};

struct RhaResult {
  Tensor<double> features;       // [views, height, width, d]
  Tensor<std::uint8_t> hit_views;  // [views, height*width] = |V_hit|
};

// Aggregates rebatched BEV features into PV risk features. For a PV query
// in view v, the nearest `n_ref` rebatched candidates of camera v supply
// the reference points; V_hit is the set of cameras whose visible set holds
// the nearest candidate's BEV query. Each hit camera's rebatched features
// are scattered back onto the BEV lattice and sampled there. Queries with
// no candidate pass through unchanged.
RhaResult rha_forward(const PvQueryGrid& pv, const RebatchedQueries& rb,
                      const VisibleIndexSets& idx, BevLattice lattice,
                      const DeformAttnParams& params,
                      const RhaOptions& options = {});

struct RiskDecoder {
  std::vector<double> weight;  // [d]
  double bias = 0.0;
  double threshold = 0.6;
};

struct RiskObject {
  std::size_t view = 0;
  std::array<double, 4> bbox{};  // normalized [x1, y1, x2, y2]
  double risk_score = 0.0;
  std::size_t rank = 0;
};

struct RiskPrediction {
  Tensor<double> pv_risk_map;  // [views, height, width] in [0, 1]
  std::vector<RiskObject> objects;  // descending risk_score
};

// Logistic head per pixel, then 4-connected components of pixels whose
// score exceeds the threshold, each scored by its maximum pixel.
RiskPrediction risk_decode(const Tensor<double>& pv_features,
                           const RiskDecoder& decoder);

GrayImage risk_map_image(const RiskPrediction& pred, std::size_t view);
std::string risk_objects_to_json(const std::vector<RiskObject>& objects);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool finite = true;

  bool passed(double tol) const { return finite && max_rel_error <= tol; }
};

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckFloor = 1e-6;

// Compares an analytic gradient of a scalar function against central
// differences. Error per component is |a - n| / max(|a|, |n|, floor).
GradCheckResult gradcheck(const std::function<double(std::span<const double>)>& f,
                          std::span<const double> x,
                          std::span<const double> analytic,
                          double step = kGradCheckStep,
                          double floor = kGradCheckFloor);

// Random-instance audits: `points` instances drawn from `seed`, each with
// every sampling location kept away from the bilinear cell boundaries.
// Returns the worst instance. The deform audit covers the query, the
// reference point and every parameter.
GradCheckResult audit_bilinear_gradients(std::uint64_t seed, std::size_t points);
GradCheckResult audit_deform_gradients(std::uint64_t seed, std::size_t points);

// Everything the risk head needs at inference time.
struct RiskHeadModel {
  PvQueryGrid pv;
  DeformAttnParams attn;
  RiskDecoder decoder;
  std::size_t n_ref = 4;

  void validate() const;
};

struct RiskHeadShape {
  std::size_t views = 6;
  std::size_t pv_height = 80;
  std::size_t pv_width = 45;
  std::size_t embed_dim = 16;
  std::size_t n_heads = 1;
  std::size_t n_points = 4;
  std::size_t n_ref = 4;
  double threshold = 0.6;
  // Feature channel carrying the synthetic risk signal; the decoder reads
  // it with a positive weight at initialization.
  std::size_t risk_channel = 0;
};

// Deterministic initialization: small Gaussian PV queries from `seed`,
// collapse-identity attention weights, and a decoder tuned to the risk
// channel.
RiskHeadModel init_risk_head(const RiskHeadShape& shape, std::uint64_t seed);

TensorBundle risk_head_to_bundle(const RiskHeadModel& model);
RiskHeadModel risk_head_from_bundle(const TensorBundle& bundle);

}  // namespace rsd
