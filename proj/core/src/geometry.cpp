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

#include "rsd/geometry.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rsd/errors.hpp"
#include "rsd/io.hpp"

namespace rsd {

using nlohmann::ordered_json;

void PointCloudRange::validate() const {
  const double v[] = {x_min, x_max, y_min, y_max, z_min, z_max};
  for (double x : v) {
    if (!std::isfinite(x)) throw ValidationError("point cloud range is not finite");
  }
  if (!(x_min < x_max) || !(y_min < y_max) || !(z_min < z_max)) {
    throw ValidationError("point cloud range requires min < max on every axis");
  }
}

void CameraRig::validate() const {
  if (cameras.empty()) throw ValidationError("camera rig has no cameras");
  for (const auto& cam : cameras) {
    if (cam.width <= 0 || cam.height <= 0) {
      throw ValidationError("camera '" + cam.name + "' has non-positive image size");
    }
    for (double v : cam.lidar2img) {
      if (!std::isfinite(v)) {
        throw ValidationError("camera '" + cam.name + "' lidar2img is not finite");
      }
    }
  }
}

CameraRig parse_rig_json(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("rig JSON: ") + e.what());
  }
  const ordered_json* list = &doc;
  if (doc.is_object() && doc.contains("cameras")) list = &doc.at("cameras");
  if (!list->is_array()) throw ParseError("rig JSON: expected an array of cameras");

  CameraRig rig;
  try {
    for (const auto& c : *list) {
      Camera cam;
      cam.name = c.at("name").get<std::string>();
      cam.width = c.at("width").get<int>();
      cam.height = c.at("height").get<int>();
      const auto& m = c.at("lidar2img");
      // Accept both the flat 16-vector and a nested 4x4 list.
      std::vector<double> flat;
      if (m.is_array() && !m.empty() && m.front().is_array()) {
        for (const auto& row : m) {
          for (const auto& v : row) flat.push_back(v.get<double>());
        }
      } else {
        flat = m.get<std::vector<double>>();
      }
      if (flat.size() != 16) {
        throw ValidationError("camera '" + cam.name +
                              "': lidar2img must have 16 entries");
      }
      std::copy(flat.begin(), flat.end(), cam.lidar2img.begin());
      rig.cameras.push_back(std::move(cam));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("rig JSON: ") + e.what());
  }
  rig.validate();
  return rig;
}

CameraRig load_rig(const std::filesystem::path& path) {
  return parse_rig_json(read_file(path));
}

std::string rig_to_json(const CameraRig& rig) {
  ordered_json out = ordered_json::array();
  for (const auto& cam : rig.cameras) {
    out.push_back({{"name", cam.name},
                   {"width", cam.width},
                   {"height", cam.height},
                   {"lidar2img", cam.lidar2img}});
  }
  return dump_json(out);
}

Mat4 mat4_identity() {
  Mat4 m{};
  m[0] = m[5] = m[10] = m[15] = 1.0;
  return m;
}

Mat4 mat4_mul(const Mat4& a, const Mat4& b) {
  Mat4 c{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += a[i * 4 + k] * b[k * 4 + j];
      c[i * 4 + j] = s;
    }
  }
  return c;
}

Vec4 mat4_apply(const Mat4& m, const Vec4& v) {
  Vec4 r{};
  for (int i = 0; i < 4; ++i) {
    r[i] = m[i * 4 + 0] * v[0] + m[i * 4 + 1] * v[1] + m[i * 4 + 2] * v[2] +
           m[i * 4 + 3] * v[3];
  }
  return r;
}

Mat4 pinhole_lidar2img(double focal, double cx, double cy, Vec3 position,
                       double yaw) {
  // Camera axes in the lidar frame: x right, y down, z forward.
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double right[3] = {s, -c, 0.0};
  const double down[3] = {0.0, 0.0, -1.0};
  const double fwd[3] = {c, s, 0.0};
  const double* axes[3] = {right, down, fwd};
  const double pos[3] = {position.x, position.y, position.z};

  Mat4 extrinsic = mat4_identity();
  for (int r = 0; r < 3; ++r) {
    double t = 0.0;
    for (int k = 0; k < 3; ++k) {
      extrinsic[r * 4 + k] = axes[r][k];
      t -= axes[r][k] * pos[k];
    }
    extrinsic[r * 4 + 3] = t;
  }
  Mat4 intrinsic = mat4_identity();
  intrinsic[0] = focal;
  intrinsic[2] = cx;
  intrinsic[5] = focal;
  intrinsic[6] = cy;
  return mat4_mul(intrinsic, extrinsic);
}

void BevGrid::ensure_queries() {
  if (queries.empty()) queries = Tensor<double>({n_bev(), embed_dim});
}

void BevGrid::validate() const {
  if (rows == 0 || cols == 0) throw ValidationError("BEV grid must be non-empty");
  if (z_samples == 0) throw ValidationError("BEV grid needs at least one height sample");
  if (embed_dim == 0) throw ValidationError("BEV embedding width must be positive");
  range.validate();
  if (!queries.empty()) {
    if (queries.rank() != 2 || queries.dim(0) != n_bev() ||
        queries.dim(1) != embed_dim) {
      throw ValidationError("BEV queries must be [rows*cols, embed_dim]");
    }
  }
}

Vec4 scale_reference_point(Vec3 r, const PointCloudRange& range) {
  const double c[3] = {r.x, r.y, r.z};
  for (double v : c) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError("normalized reference point component outside [0, 1]");
    }
  }
  return {r.x * (range.x_max - range.x_min) + range.x_min,
          r.y * (range.y_max - range.y_min) + range.y_min,
          r.z * (range.z_max - range.z_min) + range.z_min, 1.0};
}

ReferencePoints3D lift_bev_to_pillar(const BevGrid& grid) {
  const std::size_t depth = grid.z_samples;
  ReferencePoints3D ref{Tensor<double>({grid.n_bev(), depth, 3})};
  for (std::size_t row = 0; row < grid.rows; ++row) {
    const double y = (static_cast<double>(row) + 0.5) / static_cast<double>(grid.rows);
    for (std::size_t col = 0; col < grid.cols; ++col) {
      const double x = (static_cast<double>(col) + 0.5) / static_cast<double>(grid.cols);
      const std::size_t q = row * grid.cols + col;
      for (std::size_t d = 0; d < depth; ++d) {
        ref.points(q, d, 0) = x;
        ref.points(q, d, 1) = y;
        ref.points(q, d, 2) = (static_cast<double>(d) + 0.5) / static_cast<double>(depth);
      }
    }
  }
  return ref;
}

Projection project_point(const Vec4& p, const Mat4& lidar2img, int width,
                         int height, double eps) {
  const Vec4 cam = mat4_apply(lidar2img, p);
  Projection out;
  out.depth = cam[2];
  if (std::abs(cam[2]) <= eps) return out;
  out.x_norm = (cam[0] / cam[2]) / static_cast<double>(width);
  out.y_norm = (cam[1] / cam[2]) / static_cast<double>(height);
  return out;
}

bool is_visible(const Projection& p, double eps) {
  return p.x_norm > 0.0 && p.x_norm < 1.0 && p.y_norm > 0.0 && p.y_norm < 1.0 &&
         p.depth > eps;
}

MaskResult compute_bev_mask(const BevGrid& grid, const ReferencePoints3D& ref3d,
                            std::span<const CameraRig> rigs, double eps) {
  grid.validate();
  if (rigs.empty()) throw ValidationError("compute_bev_mask needs at least one rig");
  if (ref3d.points.rank() != 3 || ref3d.n_bev() != grid.n_bev() ||
      ref3d.points.dim(2) != 3) {
    throw InternalError("reference points do not match the BEV grid");
  }
  const std::size_t n_cam = rigs.front().size();
  for (const auto& rig : rigs) {
    rig.validate();
    if (rig.size() != n_cam) {
      throw ValidationError("all batch rigs must have the same camera count");
    }
  }
  const std::size_t batch = rigs.size();
  const std::size_t n_bev = ref3d.n_bev();
  const std::size_t depth = ref3d.depth();

  // Scaling is camera-independent; do it once.
  std::vector<Vec4> scaled(n_bev * depth);
  for (std::size_t q = 0; q < n_bev; ++q) {
    for (std::size_t d = 0; d < depth; ++d) {
      scaled[q * depth + d] = scale_reference_point(
          {ref3d.points(q, d, 0), ref3d.points(q, d, 1), ref3d.points(q, d, 2)},
          grid.range);
    }
  }

  MaskResult out{
      {Tensor<double>({batch, n_cam, n_bev, depth, 2}),
       Tensor<double>({batch, n_cam, n_bev, depth})},
      {Tensor<std::uint8_t>({batch, n_cam, n_bev, depth})}};
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < n_cam; ++k) {
      const Camera& cam = rigs[b].cameras[k];
      for (std::size_t q = 0; q < n_bev; ++q) {
        for (std::size_t d = 0; d < depth; ++d) {
          const Projection p = project_point(scaled[q * depth + d], cam.lidar2img,
                                             cam.width, cam.height, eps);
          out.projected.coords(b, k, q, d, 0) = p.x_norm;
          out.projected.coords(b, k, q, d, 1) = p.y_norm;
          out.projected.depth(b, k, q, d) = p.depth;
          out.mask.visible(b, k, q, d) = is_visible(p, eps) ? 1 : 0;
        }
      }
    }
  }
  return out;
}

MaskResult compute_bev_mask(const BevGrid& grid, const ReferencePoints3D& ref3d,
                            const CameraRig& rig, double eps) {
  return compute_bev_mask(grid, ref3d, std::span<const CameraRig>(&rig, 1), eps);
}

}  // namespace rsd
