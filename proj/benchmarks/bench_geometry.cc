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

#include <benchmark/benchmark.h>

#include "rsd/config.hpp"
#include "rsd/geometry.hpp"
#include "rsd/rebatch.hpp"
#include "rsd/scene.hpp"

namespace {

void BM_ComputeBevMask(benchmark::State& state) {
  rsd::RunConfig cfg;
  cfg.bev_rows = cfg.bev_cols = static_cast<std::size_t>(state.range(0));
  const rsd::BevGrid grid = cfg.bev_grid();
  const auto ref3d = rsd::lift_bev_to_pillar(grid);
  const auto rig = rsd::ring_rig(cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rsd::compute_bev_mask(grid, ref3d, rig));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(grid.n_bev()));
}
BENCHMARK(BM_ComputeBevMask)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Rebatch(benchmark::State& state) {
  rsd::RunConfig cfg;
  const rsd::BevGrid grid = cfg.bev_grid();
  const auto res = rsd::compute_bev_mask(grid, rsd::lift_bev_to_pillar(grid), rsd::ring_rig(cfg));
  const auto idx = rsd::extract_visible(res.mask);
  rsd::Tensor<double> queries({grid.n_bev(), grid.embed_dim});
  queries.fill(0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rsd::rebatch(queries, res.projected, idx));
  }
}
BENCHMARK(BM_Rebatch)->Unit(benchmark::kMillisecond);

}  // namespace
