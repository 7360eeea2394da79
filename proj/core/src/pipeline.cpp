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

#include "rsd/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <string>
#include <utility>

#include "rsd/errors.hpp"
#include "rsd/geometry.hpp"
#include "rsd/io.hpp"
#include "rsd/losses.hpp"
#include "rsd/rebatch.hpp"
#include "rsd/riskhead.hpp"

namespace rsd {

using nlohmann::ordered_json;

namespace {

template <typename F>
auto in_stage(const char* stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const ValidationError& e) {
    throw StageError(stage, e.what(), true);
  } catch (const std::exception& e) {
    throw StageError(stage, e.what(), false);
  }
}

std::size_t meta_size(const TensorBundle& b, const char* key) {
  if (!b.meta.contains(key) || !b.meta.at(key).is_number_unsigned()) {
    throw ValidationError(std::string("bundle meta lacks '") + key + "'");
  }
  return b.meta.at(key).get<std::size_t>();
}

std::vector<std::string> meta_names(const TensorBundle& b) {
  std::vector<std::string> names;
  if (b.meta.contains("cameras")) names = b.meta.at("cameras").get<std::vector<std::string>>();
  return names;
}

template <typename T>
Tensor<double> to_double(const Tensor<T>& t) {
  Tensor<double> out(t.shape());
  std::transform(t.data().begin(), t.data().end(), out.data().begin(),
                 [](T v) { return static_cast<double>(v); });
  return out;
}

const Tensor<double>& expect(const TensorBundle& b, const char* name, std::size_t rank) {
  if (!b.contains(name)) throw ValidationError(std::string("bundle lacks tensor '") + name + "'");
  const auto& t = b.get(name);
  if (t.rank() != rank) {
    throw ValidationError(std::string("tensor '") + name + "' must have rank " +
                          std::to_string(rank));
  }
  return t;
}

}  // namespace

void stage_mask(const RunConfig& cfg, const fs::path& rig_file, const fs::path& out_dir) {
  in_stage("geometry", [&] {
    cfg.validate();
    const CameraRig rig = load_rig(rig_file);
    const BevGrid grid = cfg.bev_grid();
    const ReferencePoints3D ref3d = lift_bev_to_pillar(grid);
    const MaskResult res = compute_bev_mask(grid, ref3d, rig, cfg.depth_eps);

    TensorBundle b;
    b.put("visible", to_double(res.mask.visible));
    b.put("coords", res.projected.coords);
    b.put("depth", res.projected.depth);
    std::vector<std::string> names;
    for (const auto& c : rig.cameras) names.push_back(c.name);
    b.meta = {{"rows", grid.rows},
              {"cols", grid.cols},
              {"z_samples", grid.z_samples},
              {"depth_eps", cfg.depth_eps},
              {"cameras", names}};
    write_bundle(out_dir / "mask", b);

    if (cfg.dump_pgm) {
      const auto& vis = res.mask.visible;
      for (std::size_t k = 0; k < res.mask.cameras(); ++k) {
        for (std::size_t d = 0; d < res.mask.depth(); ++d) {
          GrayImage img(grid.cols, grid.rows);
          for (std::size_t q = 0; q < grid.n_bev(); ++q) {
            if (vis(std::size_t{0}, k, q, d)) img.pixels[q] = 255;
          }
          write_pgm(out_dir / ("mask_cam" + std::to_string(k) + "_z" + std::to_string(d) +
                               ".pgm"),
                    img);
        }
      }
    }
  });
}

void stage_rebatch(const RunConfig& cfg, const fs::path& mask_dir,
                   const fs::path& queries_file, const fs::path& out_dir) {
  in_stage("rebatch", [&] {
    const TensorBundle mb = read_bundle(mask_dir / "mask");
    const TensorBundle qb = read_bundle(queries_file);
    const std::size_t rows = meta_size(mb, "rows"), cols = meta_size(mb, "cols");

    const auto& vis_d = expect(mb, "visible", 4);
    BevMask mask{Tensor<std::uint8_t>(vis_d.shape())};
    std::transform(vis_d.data().begin(), vis_d.data().end(), mask.visible.data().begin(),
                   [](double v) { return static_cast<std::uint8_t>(v != 0.0); });
    if (mask.n_bev() != rows * cols) throw ValidationError("mask size disagrees with its grid");
    ProjectedPoints2D ref2d{expect(mb, "coords", 5), expect(mb, "depth", 4)};

    const auto& queries = expect(qb, "queries", 2);
    if (queries.dim(0) != rows * cols) {
      throw ValidationError("queries hold " + std::to_string(queries.dim(0)) +
                            " rows but the mask grid has " + std::to_string(rows * cols));
    }

    const VisibleIndexSets idx = extract_visible(mask);
    const RebatchedQueries rb = rebatch(queries, ref2d, idx);

    Tensor<double> indices({idx.batch, idx.cameras, idx.l_max});
    indices.fill(-1.0);
    for (std::size_t b = 0; b < idx.batch; ++b) {
      for (std::size_t k = 0; k < idx.cameras; ++k) {
        const auto& set = idx.at(b, k);
        for (std::size_t i = 0; i < set.size(); ++i) {
          indices(b, k, i) = static_cast<double>(set[i]);
        }
      }
    }
    TensorBundle out;
    out.put("bev_prime", rb.bev_prime);
    out.put("ref2d_prime", rb.ref2d_prime);
    out.put("lengths", to_double(rb.lengths));
    out.put("indices", std::move(indices));
    out.meta = {{"rows", rows}, {"cols", cols}, {"cameras", meta_names(mb)}};
    write_bundle(out_dir / "rebatched", out);
    if (cfg.dump_indices) {
      write_file(out_dir / "indices.json", index_sets_to_json(idx, meta_names(mb)) + "\n");
    }
  });
}

void stage_riskhead(const fs::path& in_dir, const fs::path& params_file,
                    const fs::path& out_dir) {
  const auto [features, decoder] = in_stage("riskhead", [&] {
    const TensorBundle b = read_bundle(in_dir / "rebatched");
    const std::size_t rows = meta_size(b, "rows"), cols = meta_size(b, "cols");
    RebatchedQueries rb{expect(b, "bev_prime", 4), expect(b, "ref2d_prime", 5),
                        Tensor<std::size_t>({0})};
    const auto& lengths = expect(b, "lengths", 2);
    const auto& indices = expect(b, "indices", 3);
    rb.lengths = Tensor<std::size_t>(lengths.shape());
    VisibleIndexSets idx;
    idx.batch = lengths.dim(0);
    idx.cameras = lengths.dim(1);
    idx.l_max = indices.dim(2);
    if (rb.batch() != idx.batch || rb.cameras() != idx.cameras || rb.l_max() != idx.l_max ||
        indices.dim(0) != idx.batch || indices.dim(1) != idx.cameras) {
      throw ValidationError("rebatched tensors disagree on their leading dimensions");
    }
    for (std::size_t bi = 0; bi < idx.batch; ++bi) {
      for (std::size_t k = 0; k < idx.cameras; ++k) {
        const double len = lengths(bi, k);
        if (len < 0 || len > static_cast<double>(idx.l_max) || len != std::floor(len)) {
          throw ValidationError("invalid rebatched length");
        }
        rb.lengths(bi, k) = static_cast<std::size_t>(len);
        std::vector<std::size_t> set;
        for (std::size_t i = 0; i < rb.lengths(bi, k); ++i) {
          const double v = indices(bi, k, i);
          if (v < 0 || v >= static_cast<double>(rows * cols)) {
            throw ValidationError("rebatched index outside the BEV grid");
          }
          set.push_back(static_cast<std::size_t>(v));
        }
        idx.sets.push_back(std::move(set));
      }
    }

    const RiskHeadModel model = risk_head_from_bundle(read_bundle(params_file));
    if (model.pv.views != idx.cameras) {
      throw ValidationError("risk head has " + std::to_string(model.pv.views) +
                            " views but the rig has " + std::to_string(idx.cameras) +
                            " cameras");
    }
    if (model.attn.embed_dim != rb.embed_dim()) {
      throw ValidationError("risk head embedding differs from the BEV queries");
    }
    RhaOptions opt;
    opt.n_ref = model.n_ref;
    RhaResult rha = rha_forward(model.pv, rb, idx, BevLattice{rows, cols}, model.attn, opt);
    return std::make_pair(std::move(rha.features), model.decoder);
  });

  in_stage("decode", [&] {
    const RiskPrediction pred = risk_decode(features, decoder);
    for (std::size_t v = 0; v < pred.pv_risk_map.dim(0); ++v) {
      write_pgm(out_dir / ("risk_cam" + std::to_string(v) + ".pgm"), risk_map_image(pred, v));
    }
    write_file(out_dir / "risk_objects.json", risk_objects_to_json(pred.objects) + "\n");
    TensorBundle b;
    b.put("pv_risk_map", pred.pv_risk_map);
    write_bundle(out_dir / "pv_risk", b);
  });
}

MetricReport stage_eval(const RunConfig& cfg, const fs::path& pred_file,
                        const fs::path& gt_file, const std::optional<fs::path>& risk_file,
                        const fs::path& report_file, const std::optional<fs::path>& loss_file) {
  return in_stage("metrics", [&] {
    std::vector<EvalFrame> frames = parse_eval_frames(read_file(pred_file), read_file(gt_file));
    if (risk_file) {
      if (frames.size() != 1) {
        throw ValidationError("a risk file can only replace the risk of a single frame");
      }
      frames.front().risk_pred = parse_risk_boxes(read_file(*risk_file));
    }
    const EvalOptions opt = cfg.eval_options();
    const MetricReport report = evaluate(frames, opt);
    write_file(report_file, report.to_json() + "\n");

    if (loss_file) {
      std::array<double, kNumLossTerms> terms{};
      for (const auto& f : frames) {
        const RiskVectorPair pair = align_risk(f.risk_gt, f.risk_pred, opt.risk_iou);
        terms[static_cast<std::size_t>(LossTerm::kRisk)] +=
            risk_loss(pair.pred, pair.gt, cfg.risk_reduction);
      }
      write_file(*loss_file, total_loss(terms, cfg.loss_weights).to_json() + "\n");
    }
    return report;
  });
}

MetricReport run_pipeline(const RunConfig& cfg, const fs::path& scene_dir,
                          const fs::path& out_dir) {
  stage_mask(cfg, scene_dir / "rig.json", out_dir / "mask");
  stage_rebatch(cfg, out_dir / "mask", scene_dir / "queries", out_dir / "rebatch");
  stage_riskhead(out_dir / "rebatch", scene_dir / "params", out_dir / "riskhead");
  std::optional<fs::path> loss;
  if (cfg.dump_loss) loss = out_dir / "loss.json";
  return stage_eval(cfg, scene_dir / "pred.jsonl", scene_dir / "gt.jsonl",
                    out_dir / "riskhead" / "risk_objects.json", out_dir / "report.json", loss);
}

}  // namespace rsd
