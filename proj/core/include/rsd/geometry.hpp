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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsd/tensor.hpp"

namespace rsd {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

using Vec4 = std::array<double, 4>;
// Row-major 4x4 matrix.
using Mat4 = std::array<double, 16>;

inline constexpr double kDefaultDepthEpsilon = 1e-5;
// Normalized coordinate reported for a point whose camera depth is within
// epsilon of zero. It lies outside (0, 1), so it can never pass the
// visibility test.
inline constexpr double kDegenerateCoord = -1.0;

struct PointCloudRange {
  double x_min = -50.0;
  double x_max = 50.0;
  double y_min = -50.0;
  double y_max = 50.0;
  double z_min = -5.0;
  double z_max = 3.0;

  void validate() const;
};

struct Camera {
  std::string name;
  Mat4 lidar2img{};
  int width = 0;
  int height = 0;
};

struct CameraRig {
  std::vector<Camera> cameras;

  std::size_t size() const { return cameras.size(); }
  void validate() const;
};

// Reads the rig JSON format: an array of
// {"name", "width", "height", "lidar2img": [16 row-major reals]}.
// An object with a "cameras" array is accepted as well.
CameraRig parse_rig_json(std::string_view text);
CameraRig load_rig(const std::filesystem::path& path);
std::string rig_to_json(const CameraRig& rig);

// Pinhole camera mounted at `position` (lidar frame, x forward, y left,
// z up), looking along `yaw` radians about +z, with optical axis level.
Mat4 pinhole_lidar2img(double focal, double cx, double cy, Vec3 position,
                       double yaw);

Mat4 mat4_identity();
Mat4 mat4_mul(const Mat4& a, const Mat4& b);
Vec4 mat4_apply(const Mat4& m, const Vec4& v);

// H x W query lattice over a metric range. `queries` is [rows*cols, d].
struct BevGrid {
  std::size_t rows = 100;
  std::size_t cols = 100;
  PointCloudRange range;
  std::size_t z_samples = 4;
  std::size_t embed_dim = 16;
  Tensor<double> queries;

  std::size_t n_bev() const { return rows * cols; }
  // Allocates zero queries of the declared shape if none are present.
  void ensure_queries();
  void validate() const;
};

// Normalized pillar points, [N_BEV, D, 3], every coordinate in [0, 1].
struct ReferencePoints3D {
  Tensor<double> points;

  std::size_t n_bev() const { return points.dim(0); }
  std::size_t depth() const { return points.dim(1); }
};

struct ProjectedPoints2D {
  Tensor<double> coords;  // [B, N_cam, N_BEV, D, 2] normalized (x, y)
  Tensor<double> depth;   // [B, N_cam, N_BEV, D] camera-frame depth
};

struct BevMask {
  Tensor<std::uint8_t> visible;  // [B, N_cam, N_BEV, D], 0 or 1

  std::size_t batch() const { return visible.dim(0); }
  std::size_t cameras() const { return visible.dim(1); }
  std::size_t n_bev() const { return visible.dim(2); }
  std::size_t depth() const { return visible.dim(3); }
};

struct Projection {
  double x_norm = kDegenerateCoord;
  double y_norm = kDegenerateCoord;
  double depth = 0.0;
};

// Maps a normalized point into the metric range; throws DomainError when a
// component lies outside [0, 1].
Vec4 scale_reference_point(Vec3 r_norm, const PointCloudRange& range);

// Cell-centred pillar of D evenly spaced heights per BEV query.
ReferencePoints3D lift_bev_to_pillar(const BevGrid& grid);

Projection project_point(const Vec4& p_scaled, const Mat4& lidar2img,
                         int width, int height,
                         double eps = kDefaultDepthEpsilon);

bool is_visible(const Projection& p, double eps = kDefaultDepthEpsilon);

struct MaskResult {
  ProjectedPoints2D projected;
  BevMask mask;
};

// One rig per batch element; B = rigs.size().
MaskResult compute_bev_mask(const BevGrid& grid, const ReferencePoints3D& ref3d,
                            std::span<const CameraRig> rigs,
                            double eps = kDefaultDepthEpsilon);
MaskResult compute_bev_mask(const BevGrid& grid, const ReferencePoints3D& ref3d,
                            const CameraRig& rig,
                            double eps = kDefaultDepthEpsilon);

}  // namespace rsd
