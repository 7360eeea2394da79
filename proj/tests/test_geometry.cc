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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rsd/errors.hpp"
#include "rsd/geometry.hpp"

namespace {

using rsd::Vec3;

rsd::PointCloudRange cube50() {
  rsd::PointCloudRange r;
  r.z_min = -50.0;
  r.z_max = 50.0;
  return r;
}

// Projection matrix that maps every point to fixed camera coordinates
// (u * depth, v * depth, depth); handy for boundary cases.
rsd::Mat4 constant_projection(double u, double v, double depth) {
  rsd::Mat4 m{};
  m[3] = u * depth;
  m[7] = v * depth;
  m[11] = depth;
  m[15] = 1.0;
  return m;
}

rsd::BevGrid tiny_grid(std::size_t rows, std::size_t cols, std::size_t depth) {
  rsd::BevGrid g;
  g.rows = rows;
  g.cols = cols;
  g.z_samples = depth;
  return g;
}

TEST(ScaleReferencePoint, LowerCorner) {
  const auto p = rsd::scale_reference_point({0, 0, 0}, cube50());
  EXPECT_EQ(p, (rsd::Vec4{-50, -50, -50, 1}));
}

TEST(ScaleReferencePoint, Midpoint) {
  const auto p = rsd::scale_reference_point({0.5, 0.5, 0.5}, cube50());
  EXPECT_EQ(p, (rsd::Vec4{0, 0, 0, 1}));
}

TEST(ScaleReferencePoint, AsymmetricHeightRange) {
  const auto p = rsd::scale_reference_point({0.25, 0.75, 1.0}, rsd::PointCloudRange{});
  EXPECT_EQ(p, (rsd::Vec4{-25, 25, 3, 1}));
}

TEST(ScaleReferencePoint, OutsideUnitCubeIsDomainError) {
  EXPECT_THROW(rsd::scale_reference_point({1.0001, 0, 0}, {}), rsd::DomainError);
  EXPECT_THROW(rsd::scale_reference_point({0, -0.1, 0}, {}), rsd::DomainError);
  EXPECT_THROW(rsd::scale_reference_point({0, 0, NAN}, {}), rsd::DomainError);
}

TEST(PointCloudRange, RejectsEmptyAxis) {
  rsd::PointCloudRange r;
  r.y_max = r.y_min;
  EXPECT_THROW(r.validate(), rsd::ValidationError);
}

TEST(LiftBevToPillar, SingleCellCentre) {
  const auto ref = rsd::lift_bev_to_pillar(tiny_grid(1, 1, 1));
  EXPECT_EQ(ref.points(0, 0, 0), 0.5);
  EXPECT_EQ(ref.points(0, 0, 1), 0.5);
  EXPECT_EQ(ref.points(0, 0, 2), 0.5);
}

TEST(LiftBevToPillar, TwoByTwoCentres) {
  const auto ref = rsd::lift_bev_to_pillar(tiny_grid(2, 2, 1));
  const double xs[4] = {0.25, 0.75, 0.25, 0.75};
  const double ys[4] = {0.25, 0.25, 0.75, 0.75};
  for (std::size_t q = 0; q < 4; ++q) {
    EXPECT_EQ(ref.points(q, 0, 0), xs[q]);
    EXPECT_EQ(ref.points(q, 0, 1), ys[q]);
  }
}

TEST(LiftBevToPillar, EvenHeights) {
  const auto ref = rsd::lift_bev_to_pillar(tiny_grid(1, 1, 4));
  const double zs[4] = {0.125, 0.375, 0.625, 0.875};
  for (std::size_t d = 0; d < 4; ++d) EXPECT_EQ(ref.points(0, d, 2), zs[d]);
}

TEST(ProjectPoint, OpticalAxisHitsPrincipalPoint) {
  const int w = 1600, h = 900;
  const auto m = rsd::pinhole_lidar2img(w / 2.0, w / 2.0, h / 2.0, {0, 0, 0}, 0.0);
  const auto p = rsd::project_point({10, 0, 0, 1}, m, w, h);
  EXPECT_DOUBLE_EQ(p.x_norm, 0.5);
  EXPECT_DOUBLE_EQ(p.y_norm, 0.5);
  EXPECT_DOUBLE_EQ(p.depth, 10.0);
}

TEST(ProjectPoint, UnitLateralOffsetReachesRightBorder) {
  const int w = 1600, h = 900;
  const auto m = rsd::pinhole_lidar2img(w / 2.0, w / 2.0, h / 2.0, {0, 0, 0}, 0.0);
  // Camera right is lidar -y.
  const auto p = rsd::project_point({10, -10, 0, 1}, m, w, h);
  EXPECT_DOUBLE_EQ(p.x_norm, 1.0);
  EXPECT_FALSE(rsd::is_visible(p));
}

TEST(ProjectPoint, BehindCameraNeverVisible) {
  const auto p = rsd::project_point({0, 0, 0, 1}, constant_projection(0.5, 0.5, -5.0), 1, 1);
  EXPECT_EQ(p.depth, -5.0);
  EXPECT_FALSE(rsd::is_visible(p));
}

TEST(ProjectPoint, DegenerateDepthGivesSentinel) {
  for (double depth : {0.0, 1e-5, -1e-5, 5e-6}) {
    const auto p = rsd::project_point({0, 0, 0, 1}, constant_projection(0.5, 0.5, depth), 1, 1);
    EXPECT_EQ(p.x_norm, rsd::kDegenerateCoord) << depth;
    EXPECT_EQ(p.y_norm, rsd::kDegenerateCoord) << depth;
    EXPECT_TRUE(std::isfinite(p.x_norm));
    EXPECT_FALSE(rsd::is_visible(p));
  }
}

TEST(ProjectPoint, ConsistentAcrossNormalizedAndMetricForms) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const rsd::PointCloudRange range;
  const auto m = rsd::pinhole_lidar2img(700, 800, 450, {0.3, -0.2, 1.6}, 0.4);
  for (int i = 0; i < 200; ++i) {
    const Vec3 r{u(rng), u(rng), u(rng)};
    const auto a = rsd::project_point(rsd::scale_reference_point(r, range), m, 1600, 900);
    const rsd::Vec4 metric{r.x * 100 - 50, r.y * 100 - 50, r.z * 8 - 5, 1};
    const auto b = rsd::project_point(metric, m, 1600, 900);
    EXPECT_NEAR(a.x_norm, b.x_norm, 1e-9);
    EXPECT_NEAR(a.y_norm, b.y_norm, 1e-9);
    EXPECT_NEAR(a.depth, b.depth, 1e-9);
  }
}

TEST(ComputeBevMask, AllBehindGivesZeroMask) {
  const auto g = tiny_grid(10, 10, 4);
  rsd::CameraRig rig{{{"back", constant_projection(0.5, 0.5, -3.0), 100, 100}}};
  const auto res = rsd::compute_bev_mask(g, rsd::lift_bev_to_pillar(g), rig);
  for (auto v : res.mask.visible.data()) EXPECT_EQ(v, 0);
}

TEST(ComputeBevMask, DownwardCameraSeesWholeGrid) {
  // Looking straight down from 100 m with a narrow focal length.
  const int w = 800, h = 800;
  rsd::Mat4 m{};
  const double f = w / 4.0;
  // right = -y, down = -x, forward = -z; camera at z = 100.
  m[0] = 0;  m[1] = -f; m[2] = -w / 2.0; m[3] = 100 * w / 2.0;
  m[4] = -f; m[5] = 0;  m[6] = -h / 2.0; m[7] = 100 * h / 2.0;
  m[8] = 0;  m[9] = 0;  m[10] = -1;      m[11] = 100;
  m[15] = 1;
  rsd::CameraRig rig{{{"down", m, w, h}}};
  const auto g = tiny_grid(100, 100, 4);
  const auto res = rsd::compute_bev_mask(g, rsd::lift_bev_to_pillar(g), rig);
  for (auto v : res.mask.visible.data()) ASSERT_EQ(v, 1);
  const auto want = oracle::bev_mask(g, rig, rsd::kDefaultDepthEpsilon);
  for (std::size_t q = 0; q < g.n_bev(); ++q) {
    for (std::size_t d = 0; d < 4; ++d) ASSERT_EQ(want[0][q][d], 1);
  }
}

TEST(ComputeBevMask, MatchesScalarOracleOnRandomRigs) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const auto rig = oracle::random_rig(rng, 3);
    const auto g = tiny_grid(40, 30, 3);
    const auto res = rsd::compute_bev_mask(g, rsd::lift_bev_to_pillar(g), rig);
    const auto want = oracle::bev_mask(g, rig, rsd::kDefaultDepthEpsilon);
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t q = 0; q < g.n_bev(); ++q) {
        for (std::size_t d = 0; d < 3; ++d) {
          ASSERT_EQ(res.mask.visible(std::size_t{0}, k, q, d), want[k][q][d]);
        }
      }
    }
  }
}

TEST(ComputeBevMask, BatchOfRigsIsIndependent) {
  std::mt19937_64 rng(5);
  const std::vector<rsd::CameraRig> rigs{oracle::random_rig(rng, 2), oracle::random_rig(rng, 2)};
  const auto g = tiny_grid(12, 12, 2);
  const auto ref = rsd::lift_bev_to_pillar(g);
  const auto both = rsd::compute_bev_mask(g, ref, rigs);
  ASSERT_EQ(both.mask.batch(), 2u);
  for (std::size_t b = 0; b < 2; ++b) {
    const auto single = rsd::compute_bev_mask(g, ref, rigs[b]);
    const auto s = both.mask.visible.slice(b);
    EXPECT_TRUE(std::equal(s.begin(), s.end(), single.mask.visible.data().begin()));
  }
}

TEST(ComputeBevMask, BorderAndEpsilonAreExcluded) {
  const auto g = tiny_grid(1, 1, 1);
  const auto ref = rsd::lift_bev_to_pillar(g);
  auto visible = [&](const rsd::Mat4& m) {
    rsd::CameraRig rig{{{"c", m, 1, 1}}};
    return rsd::compute_bev_mask(g, ref, rig).mask.visible(0, 0, 0, 0);
  };
  EXPECT_EQ(visible(constant_projection(0.0, 0.5, 2.0)), 0);
  EXPECT_EQ(visible(constant_projection(1.0, 0.5, 2.0)), 0);
  EXPECT_EQ(visible(constant_projection(0.5, 0.0, 2.0)), 0);
  EXPECT_EQ(visible(constant_projection(0.5, 1.0, 2.0)), 0);
  EXPECT_EQ(visible(constant_projection(0.5, 0.5, rsd::kDefaultDepthEpsilon)), 0);
  EXPECT_EQ(visible(constant_projection(0.5, 0.5, 2.0 * rsd::kDefaultDepthEpsilon)), 1);
  EXPECT_EQ(visible(constant_projection(0.5, 0.5, 2.0)), 1);
}

TEST(ComputeBevMask, DepthRecordedBeforeFilter) {
  const auto g = tiny_grid(1, 1, 1);
  rsd::CameraRig rig{{{"c", constant_projection(3.0, 0.5, 7.0), 1, 1}}};
  const auto res = rsd::compute_bev_mask(g, rsd::lift_bev_to_pillar(g), rig);
  EXPECT_EQ(res.mask.visible(0, 0, 0, 0), 0);
  EXPECT_DOUBLE_EQ(res.projected.depth(0, 0, 0, 0), 7.0);
  EXPECT_DOUBLE_EQ(res.projected.coords(0, 0, 0, 0, 0), 3.0);
}

TEST(ComputeBevMask, LargerSensorNeverLosesPoints) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> yaw(-M_PI, M_PI);
  const auto g = tiny_grid(30, 30, 4);
  const auto ref = rsd::lift_bev_to_pillar(g);
  for (int trial = 0; trial < 10; ++trial) {
    const double a = yaw(rng);
    rsd::CameraRig small{{{"s", rsd::pinhole_lidar2img(500, 400, 300, {0, 0, 1.5}, a), 800, 600}}};
    // Same focal length, principal point moved to the centre of a sensor
    // twice as large: the original image is the central crop.
    rsd::CameraRig large{{{"l", rsd::pinhole_lidar2img(500, 800, 600, {0, 0, 1.5}, a), 1600, 1200}}};
    const auto ms = rsd::compute_bev_mask(g, ref, small).mask.visible.values();
    const auto ml = rsd::compute_bev_mask(g, ref, large).mask.visible.values();
    for (std::size_t i = 0; i < ms.size(); ++i) {
      if (ms[i]) ASSERT_EQ(ml[i], 1);
    }
  }
}

TEST(ComputeBevMask, MismatchedReferencePointsAreInternalError) {
  const auto g = tiny_grid(4, 4, 2);
  const auto ref = rsd::lift_bev_to_pillar(tiny_grid(3, 3, 2));
  rsd::CameraRig rig{{{"c", constant_projection(0.5, 0.5, 1.0), 1, 1}}};
  EXPECT_THROW(rsd::compute_bev_mask(g, ref, rig), rsd::InternalError);
}

TEST(RigJson, RoundTripsThroughText) {
  std::mt19937_64 rng(21);
  const auto rig = oracle::random_rig(rng, 4);
  const auto back = rsd::parse_rig_json(rsd::rig_to_json(rig));
  ASSERT_EQ(back.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(back.cameras[k].name, rig.cameras[k].name);
    EXPECT_EQ(back.cameras[k].width, rig.cameras[k].width);
    EXPECT_EQ(back.cameras[k].lidar2img, rig.cameras[k].lidar2img);
  }
}

TEST(RigJson, AcceptsNestedMatrixAndWrapper) {
  const char* text = R"({"cameras": [{"name": "front", "width": 10, "height": 5,
    "lidar2img": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]}]})";
  const auto rig = rsd::parse_rig_json(text);
  ASSERT_EQ(rig.size(), 1u);
  EXPECT_EQ(rig.cameras[0].lidar2img, rsd::mat4_identity());
}

TEST(RigJson, RejectsBadInput) {
  EXPECT_THROW(rsd::parse_rig_json("not json"), rsd::ParseError);
  EXPECT_THROW(rsd::parse_rig_json("[]"), rsd::ValidationError);
  EXPECT_THROW(rsd::parse_rig_json(R"([{"name":"a","width":0,"height":5,
      "lidar2img":[1,0,0,0,0,1,0,0,0,0,1,0,0,0,0,1]}])"),
               rsd::ValidationError);
  EXPECT_THROW(rsd::parse_rig_json(R"([{"name":"a","width":4,"height":5,
      "lidar2img":[1,0,0]}])"),
               rsd::ValidationError);
}

}  // namespace
