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

// rsd: command-line front end for the risk distillation toolkit.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rsd/annotation.hpp"
#include "rsd/config.hpp"
#include "rsd/errors.hpp"
#include "rsd/io.hpp"
#include "rsd/metrics.hpp"
#include "rsd/pipeline.hpp"
#include "rsd/riskhead.hpp"
#include "rsd/scene.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;

rsd::RunConfig config_from(const std::string& path) {
  return path.empty() ? rsd::RunConfig{} : rsd::load_config(path);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Risk vectors for diff-risk: a plain array of numbers, an array of
// {"view", "bbox", "risk_score"} boxes, or a rank-keyed annotation file.
enum class RiskInputKind { kVector, kBoxes };

struct RiskInput {
  RiskInputKind kind = RiskInputKind::kVector;
  std::vector<double> values;
  std::vector<rsd::RiskBox> boxes;
};

RiskInput read_risk_input(const std::string& path) {
  const std::string text = rsd::read_file(path);
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception&) {
    j = nullptr;  // fall through to the relaxed annotation parser
  }
  RiskInput in;
  if (j.is_array() && std::all_of(j.begin(), j.end(), [](const auto& v) {
        return v.is_number();
      })) {
    for (const auto& v : j) in.values.push_back(v.get<double>());
    return in;
  }
  in.kind = RiskInputKind::kBoxes;
  if (j.is_array()) {
    in.boxes = rsd::parse_risk_boxes(text);
    return in;
  }
  const auto parsed = rsd::parse_vlm_output(text);
  for (const auto& w : parsed.warnings) std::cerr << path << ": warning: " << w << "\n";
  for (const auto& e : parsed.entries) in.boxes.push_back({0, e.bbox, e.risk_score});
  return in;
}

int cmd_validate(const std::vector<std::string>& files, double width, double height,
                 const rsd::CategoryTable& categories) {
  std::optional<rsd::ImageBounds> bounds;
  if (width > 0 && height > 0) bounds = rsd::ImageBounds{width, height};
  int status = kExitOk;
  for (const auto& file : files) {
    try {
      const auto parsed = rsd::parse_vlm_output(rsd::read_file(file), bounds, categories);
      for (const auto& w : parsed.warnings) std::cout << file << ": warning: " << w << "\n";
      for (const auto& r : rsd::check_rank_score_consistency(parsed.entries)) {
        std::cout << file << ": warning: " << r.message() << "\n";
      }
      std::cout << file << ": ok (" << parsed.entries.size() << " entries)\n";
    } catch (const rsd::ValidationError& e) {
      std::cout << file << ": invalid: " << e.what() << "\n";
      status = kExitInvalid;
    }
  }
  return status;
}

int cmd_gradcheck(const std::string& op, std::uint64_t seed, std::size_t points) {
  constexpr double kBilinearTol = 1e-6;
  constexpr double kDeformTol = 1e-4;
  bool ok = true;
  auto report = [&](const char* name, const rsd::GradCheckResult& r, double tol) {
    const bool pass = r.passed(tol);
    ok = ok && pass;
    std::cout << name << ": max_rel_error=" << fmt(r.max_rel_error) << " tol=" << tol
              << " index=" << r.worst_index << " analytic=" << fmt(r.analytic)
              << " numeric=" << fmt(r.numeric) << (pass ? " PASS" : " FAIL") << "\n";
  };
  if (op == "all" || op == "bilinear") {
    report("bilinear", rsd::audit_bilinear_gradients(seed, points), kBilinearTol);
  }
  if (op == "all" || op == "deform") {
    report("deform", rsd::audit_deform_gradients(seed, points), kDeformTol);
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk distillation toolkit: geometry, rebatching, risk head and metrics"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "TOML-style run configuration")
      ->check(CLI::ExistingFile);

  // gen-scene
  std::uint64_t seed = 7;
  std::size_t n_objects = 12;
  std::string out_dir;
  auto* gen = app.add_subcommand("gen-scene", "Write a synthetic scene with ground truth");
  gen->add_option("--seed", seed, "Scene seed")->capture_default_str();
  gen->add_option("--objects", n_objects, "Number of objects")->capture_default_str();
  gen->add_option("--out", out_dir, "Output directory")->required();

  // mask
  std::string rig_file;
  std::vector<std::size_t> grid;
  std::size_t depth = 0;
  bool dump_pgm = false;
  auto* mask = app.add_subcommand("mask", "Compute BEV visibility masks for a camera rig");
  mask->add_option("--rig", rig_file, "Rig JSON")->required()->check(CLI::ExistingFile);
  mask->add_option("--grid", grid, "BEV rows and columns")->expected(2);
  mask->add_option("--depth", depth, "Height samples per pillar");
  mask->add_option("--out", out_dir, "Output directory")->required();
  mask->add_flag("--dump-pgm", dump_pgm, "Write one PGM per camera and height");

  // rebatch
  std::string mask_dir, queries_file;
  bool dump_indices = false;
  auto* reb = app.add_subcommand("rebatch", "Gather visible BEV queries per camera");
  reb->add_option("--mask", mask_dir, "Directory written by mask")->required();
  reb->add_option("--queries", queries_file, "BEV query bundle")->required();
  reb->add_option("--out", out_dir, "Output directory")->required();
  reb->add_flag("--dump-indices", dump_indices, "Write indices.json");

  // riskhead
  std::string in_dir, params_file;
  auto* head = app.add_subcommand("riskhead", "Run the risk head and decode risk maps");
  head->add_option("--in", in_dir, "Directory written by rebatch")->required();
  head->add_option("--params", params_file, "Risk head parameter bundle")->required();
  head->add_option("--out", out_dir, "Output directory")->required();

  // eval
  std::string pred_file, gt_file, report_file, risk_file, loss_file;
  auto* ev = app.add_subcommand("eval", "Compute the metric report");
  ev->add_option("--pred", pred_file, "Prediction JSON lines")->required()->check(CLI::ExistingFile);
  ev->add_option("--gt", gt_file, "Ground-truth JSON lines")->required()->check(CLI::ExistingFile);
  ev->add_option("--report", report_file, "Report output path")->required();
  ev->add_option("--risk", risk_file, "Risk objects replacing the predicted risk")
      ->check(CLI::ExistingFile);
  ev->add_option("--loss", loss_file, "Also write the composed loss here");

  // diff-risk
  bool elementwise = false;
  double iou = 0.5;
  auto* dr = app.add_subcommand("diff-risk", "Normalized risk discrepancy");
  dr->add_option("--gt", gt_file, "Ground-truth risk")->required()->check(CLI::ExistingFile);
  dr->add_option("--pred", pred_file, "Predicted risk")->required()->check(CLI::ExistingFile);
  dr->add_flag("--elementwise", elementwise, "Mean absolute numerator");
  dr->add_option("--iou", iou, "Box alignment IoU threshold")->capture_default_str();

  // validate-annotations
  std::vector<std::string> ann_files;
  double img_w = 0.0, img_h = 0.0;
  auto* va = app.add_subcommand("validate-annotations", "Check VLM risk annotations");
  va->add_option("files", ann_files, "Annotation files")->required()->check(CLI::ExistingFile);
  va->add_option("--width", img_w, "Image width for bbox bounds");
  va->add_option("--height", img_h, "Image height for bbox bounds");

  // gradcheck
  std::string op = "all";
  std::size_t points = 20;
  std::uint64_t grad_seed = 1;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient audit");
  gc->add_option("--op", op, "Operator")
      ->check(CLI::IsMember({"all", "bilinear", "deform"}))
      ->capture_default_str();
  gc->add_option("--points", points, "Random instances")->capture_default_str();
  gc->add_option("--seed", grad_seed, "Instance seed")->capture_default_str();

  // run
  std::string scene_dir;
  auto* run = app.add_subcommand("run", "Run every stage over a generated scene");
  run->add_option("--scene", scene_dir, "Directory written by gen-scene")->required();
  run->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*gen) {
      const rsd::RunConfig cfg = config_from(config_path);
      rsd::write_scene(cfg, rsd::make_scene(cfg, seed, n_objects), out_dir);
    } else if (*mask) {
      rsd::RunConfig cfg = config_from(config_path);
      if (!grid.empty()) {
        cfg.bev_rows = grid[0];
        cfg.bev_cols = grid[1];
      }
      if (mask->count("--depth") > 0) cfg.z_samples = depth;
      cfg.dump_pgm = cfg.dump_pgm || dump_pgm;
      rsd::stage_mask(cfg, rig_file, out_dir);
    } else if (*reb) {
      rsd::RunConfig cfg = config_from(config_path);
      cfg.dump_indices = cfg.dump_indices || dump_indices;
      rsd::stage_rebatch(cfg, mask_dir, queries_file, out_dir);
    } else if (*head) {
      rsd::stage_riskhead(in_dir, params_file, out_dir);
    } else if (*ev) {
      const rsd::RunConfig cfg = config_from(config_path);
      std::optional<fs::path> risk, loss;
      if (!risk_file.empty()) risk = risk_file;
      if (!loss_file.empty()) loss = loss_file;
      const auto report = rsd::stage_eval(cfg, pred_file, gt_file, risk, report_file, loss);
      std::cout << report.to_json() << "\n";
    } else if (*dr) {
      const RiskInput gt = read_risk_input(gt_file);
      const RiskInput pred = read_risk_input(pred_file);
      rsd::RiskVectorPair pair;
      if (gt.kind == RiskInputKind::kVector && pred.kind == RiskInputKind::kVector) {
        pair = {gt.values, pred.values};
      } else if (gt.kind == RiskInputKind::kBoxes && pred.kind == RiskInputKind::kBoxes) {
        pair = rsd::align_risk(gt.boxes, pred.boxes, iou);
      } else {
        throw rsd::ValidationError("--gt and --pred must both be vectors or both be boxes");
      }
      const auto num = elementwise ? rsd::DiffRiskNumerator::kElementwiseMean
                                   : rsd::DiffRiskNumerator::kFrobenius;
      std::cout << fmt(rsd::diff_risk(pair, num)) << "\n";
    } else if (*va) {
      return cmd_validate(ann_files, img_w, img_h, config_from(config_path).category_table());
    } else if (*gc) {
      return cmd_gradcheck(op, grad_seed, points);
    } else if (*run) {
      const fs::path scene_cfg = fs::path(scene_dir) / "config.toml";
      rsd::RunConfig cfg;
      if (!config_path.empty()) {
        cfg = rsd::load_config(config_path);
      } else if (fs::exists(scene_cfg)) {
        cfg = rsd::load_config(scene_cfg);
      }
      const auto report = rsd::run_pipeline(cfg, scene_dir, out_dir);
      std::cout << report.to_json() << "\n";
    }
  } catch (const rsd::StageError& e) {
    std::cerr << "rsd: " << e.what() << "\n";
    return e.is_validation() ? kExitInvalid : kExitFailure;
  } catch (const rsd::ValidationError& e) {
    std::cerr << "rsd: invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "rsd: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
