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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "rsd/annotation.hpp"
#include "rsd/geometry.hpp"
#include "rsd/losses.hpp"
#include "rsd/metrics.hpp"
#include "rsd/riskhead.hpp"

namespace rsd {

// Settings for one end-to-end run. Every field has a default, so an empty
// file is a valid configuration.
struct RunConfig {
  // BEV lattice
  std::size_t bev_rows = 100;
  std::size_t bev_cols = 100;
  std::size_t z_samples = 4;
  std::size_t embed_dim = 16;
  PointCloudRange range;
  double depth_eps = kDefaultDepthEpsilon;

  // Risk head
  std::size_t pv_height = 80;
  std::size_t pv_width = 45;
  std::size_t n_heads = 1;
  std::size_t n_points = 4;
  std::size_t n_ref = 4;
  double offset_scale = 1.0 / 16.0;
  double threshold = 0.6;

  // Losses
  LossWeights loss_weights;
  RiskReduction risk_reduction = RiskReduction::kSum;

  // Metrics
  SpatialError spatial_error = SpatialError::kSize;
  DiffRiskNumerator diff_risk = DiffRiskNumerator::kFrobenius;
  double risk_iou = 0.5;

  // Synthetic scene
  std::size_t cameras = 6;
  double camera_yaw_step_deg = 60.0;
  int image_width = 1600;
  int image_height = 900;
  double focal = 800.0;
  double camera_height = 1.6;

  // Optional dumps
  bool dump_pgm = false;
  bool dump_indices = false;
  bool dump_loss = true;

  // Extra or overridden annotation categories, from keys
  // `categories.<name> = <id>` (underscores in <name> read as spaces).
  std::map<std::string, int> categories;

  std::uint64_t seed = 7;

  // Throws ValidationError describing the first bad field.
  void validate() const;

  RiskHeadShape head_shape() const;
  BevGrid bev_grid() const;
  EvalOptions eval_options() const;
  CategoryTable category_table() const;
};

// Parses `key = value` lines. `#` starts a comment, `[section]` prefixes
// the following keys with "section.". Values are integers, reals, booleans
// or double-quoted strings. Unknown keys and malformed lines throw
// ValidationError (ParseError for syntax) with the line number.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// Writes every key with its current value; parse_config round-trips it.
std::string config_to_toml(const RunConfig& cfg);

}  // namespace rsd
