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
#include <vector>

#include "rsd/metrics.hpp"

namespace {

void BM_RectsIntersect(benchmark::State& state) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(-5.0, 5.0), ext(0.5, 4.0), ang(-3.14, 3.14);
  std::vector<rsd::OrientedRect> rects(1024);
  for (auto& r : rects) r = {{pos(rng), pos(rng)}, ext(rng), ext(rng), ang(rng)};
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rsd::rects_intersect(rects[i % 1024], rects[(i + 1) % 1024]));
    ++i;
  }
}
BENCHMARK(BM_RectsIntersect);

void BM_MeanAp(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(-40.0, 40.0), noise(-0.8, 0.8), unit(0.0, 1.0);
  rsd::DetectionSet set(static_cast<std::size_t>(state.range(0)));
  for (auto& frame : set) {
    for (int k = 0; k < 30; ++k) {
      rsd::Detection g;
      g.category = k % 2 ? "car" : "pedestrian";
      g.position = {pos(rng), pos(rng), 0.0};
      frame.ground_truth.push_back(g);
      rsd::Detection p = g;
      p.position.x += noise(rng);
      p.position.y += noise(rng);
      p.score = unit(rng);
      frame.predictions.push_back(p);
    }
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(rsd::mean_ap(set));
  }
}
BENCHMARK(BM_MeanAp)->Arg(10)->Arg(100);

}  // namespace
