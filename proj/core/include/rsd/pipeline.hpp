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

#include <filesystem>
#include <optional>

#include "rsd/config.hpp"
#include "rsd/metrics.hpp"

namespace rsd {

namespace fs = std::filesystem;

// Each stage reads only the files named in its arguments and writes only
// into its output location. Failures surface as StageError tagged with the
// stage name: geometry, rebatch, riskhead, decode or metrics.

// Writes <out>/mask.{json,bin} (visible, coords, depth) and, with
// cfg.dump_pgm, <out>/mask_cam<k>_z<d>.pgm.
void stage_mask(const RunConfig& cfg, const fs::path& rig_file, const fs::path& out_dir);

// Writes <out>/rebatched.{json,bin} (bev_prime, ref2d_prime, lengths,
// indices) and, with cfg.dump_indices, <out>/indices.json.
void stage_rebatch(const RunConfig& cfg, const fs::path& mask_dir,
                   const fs::path& queries_file, const fs::path& out_dir);

// Writes <out>/risk_cam<k>.pgm, <out>/risk_objects.json and
// <out>/pv_risk.{json,bin}.
void stage_riskhead(const fs::path& in_dir, const fs::path& params_file,
                    const fs::path& out_dir);

// Evaluates prediction against ground truth and writes the report. When
// `risk_file` is given its boxes replace the predicted risk of the single
// frame. With `loss_file`, the composed loss is written as well; only the
// risk term is observable here, the planning terms are reported as zero.
MetricReport stage_eval(const RunConfig& cfg, const fs::path& pred_file,
                        const fs::path& gt_file, const std::optional<fs::path>& risk_file,
                        const fs::path& report_file,
                        const std::optional<fs::path>& loss_file = std::nullopt);

// geometry -> rebatch -> riskhead -> decode -> metrics over a directory
// written by write_scene. Outputs go to <out>/mask, <out>/rebatch,
// <out>/riskhead, <out>/report.json and <out>/loss.json.
MetricReport run_pipeline(const RunConfig& cfg, const fs::path& scene_dir,
                          const fs::path& out_dir);

}  // namespace rsd
