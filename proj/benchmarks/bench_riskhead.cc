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

#include <random>

#include "rsd/config.hpp"
#include "rsd/rebatch.hpp"
#include "rsd/riskhead.hpp"
#include "rsd/scene.hpp"

namespace {

void BM_NnMatch(benchmark::State& state) {
  rsd::RunConfig cfg;
  const rsd::BevGrid grid = cfg.bev_grid();
  const auto res = rsd::compute_bev_mask(grid, rsd::lift_bev_to_pillar(grid), rsd::ring_rig(cfg));
  const auto idx = rsd::extract_visible(res.mask);
  rsd::Tensor<double> queries({grid.n_bev(), grid.embed_dim});
  const auto rb = rsd::rebatch(queries, res.projected, idx);
  rsd::PvQueryGrid pv;
  pv.height = static_cast<std::size_t>(state.range(0));
  pv.width = pv.height * 9 / 16;
  const auto centers = pv.centers(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rsd::nn_match(centers, rb, 1));
  }
}
BENCHMARK(BM_NnMatch)->Arg(16)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_DeformAttn(benchmark::State& state) {
  const std::size_t d = 16, h = 50, w = 50;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> storage(h * w * d);
  for (double& v : storage) v = nd(rng);
  const rsd::FeatureMap map{h, w, d, storage};
  auto p = rsd::DeformAttnParams::init(d, static_cast<std::size_t>(state.range(0)), 4);
  std::vector<double> q(d, 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rsd::deform_attn(q, {0.4, 0.6}, map, p));
  }
}
BENCHMARK(BM_DeformAttn)->Arg(1)->Arg(4);

void BM_DeformAttnBackward(benchmark::State& state) {
  const std::size_t d = 16, h = 50, w = 50;
  std::vector<double> storage(h * w * d, 0.25);
  const rsd::FeatureMap map{h, w, d, storage};
  const auto p = rsd::DeformAttnParams::init(d, 4, 4);
  std::vector<double> q(d, 0.1), g(d, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rsd::deform_attn_backward(q, {0.4, 0.6}, map, p, g));
  }
}
BENCHMARK(BM_DeformAttnBackward);

}  // namespace
