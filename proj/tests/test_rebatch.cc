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

#include <algorithm>
#include <numeric>
#include <random>

#include "builders.hpp"
#include "oracles.hpp"
#include "rsd/errors.hpp"
#include "rsd/rebatch.hpp"

namespace {

using rsd::Tensor;

using Fixture = build::RebatchInput;

// Queries [1, n, d] whose i-th row is filled with i + 1.
Tensor<double> ramp_queries(std::size_t n, std::size_t d) {
  Tensor<double> q({1, n, d});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) q(std::size_t{0}, i, c) = static_cast<double>(i + 1);
  }
  return q;
}

TEST(ExtractVisible, EmptyMaskGivesZeroLengthSets) {
  rsd::BevMask m;
  m.visible = Tensor<std::uint8_t>({1, 3, 10, 2});
  const auto idx = rsd::extract_visible(m);
  EXPECT_EQ(idx.l_max, 0u);
  EXPECT_EQ(idx.total(), 0u);
  rsd::ProjectedPoints2D ref;
  ref.coords = Tensor<double>({1, 3, 10, 2, 2});
  ref.depth = Tensor<double>({1, 3, 10, 2});
  const auto rb = rsd::rebatch(ramp_queries(10, 4), ref, idx);
  EXPECT_EQ(rb.l_max(), 0u);
  EXPECT_EQ(rb.bev_prime.size(), 0u);
  for (auto len : rb.lengths.data()) EXPECT_EQ(len, 0u);
}

TEST(ExtractVisible, AnyHeightCounts) {
  rsd::BevMask m;
  m.visible = Tensor<std::uint8_t>({1, 1, 10, 4});
  m.visible(0, 0, 3, 2) = 1;
  m.visible(0, 0, 7, 0) = 1;
  m.visible(0, 0, 7, 3) = 1;
  const auto idx = rsd::extract_visible(m);
  EXPECT_EQ(idx.at(0, 0), (std::vector<std::size_t>{3, 7}));
  EXPECT_EQ(idx.l_max, 2u);
}

TEST(Rebatch, GathersRowsInAscendingOrder) {
  rsd::BevMask m;
  m.visible = Tensor<std::uint8_t>({1, 1, 10, 1});
  m.visible(0, 0, 3, 0) = 1;
  m.visible(0, 0, 7, 0) = 1;
  rsd::ProjectedPoints2D ref;
  ref.coords = Tensor<double>({1, 1, 10, 1, 2});
  ref.coords(0, 0, 7, 0, 1) = 0.25;
  ref.depth = Tensor<double>({1, 1, 10, 1});
  const auto rb = rsd::rebatch(ramp_queries(10, 3), ref, rsd::extract_visible(m));
  EXPECT_EQ(rb.bev_prime(0, 0, 0, 0), 4.0);
  EXPECT_EQ(rb.bev_prime(0, 0, 1, 2), 8.0);
  EXPECT_EQ(rb.ref2d_prime(0, 0, 1, 0, 1), 0.25);
  EXPECT_EQ(rb.lengths(0, 0), 2u);
}

TEST(Rebatch, SingleVisibleQueryCopiedExactly) {
  std::mt19937_64 rng(1);
  auto f = build::random_rebatch_input(rng, 1, 2, 6, 2, 5, 0.0);
  f.mask.visible(0, 1, 4, 1) = 1;
  const auto idx = rsd::extract_visible(f.mask);
  const auto rb = rsd::rebatch(f.queries, f.ref2d, idx);
  ASSERT_EQ(rb.l_max(), 1u);
  for (std::size_t c = 0; c < 5; ++c) {
    EXPECT_EQ(rb.bev_prime(0, 1, 0, c), f.queries(std::size_t{0}, std::size_t{4}, c));
  }
  for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(rb.bev_prime(0, 0, 0, c), rsd::kRebatchPad);
}

TEST(Rebatch, MatchesGatherOracleAndKeepsPadsClean) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto f = build::random_rebatch_input(rng, 2, 3, 25, 3, 4, 0.2);
    const auto idx = rsd::extract_visible(f.mask);
    const auto rb = rsd::rebatch(f.queries, f.ref2d, idx);
    std::size_t l_max = 0;
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t k = 0; k < 3; ++k) {
        const auto want = oracle::visible_indices(f.mask, b, k);
        ASSERT_EQ(idx.at(b, k), want);
        l_max = std::max(l_max, want.size());
        ASSERT_EQ(rb.lengths(b, k), want.size());
        for (std::size_t l = 0; l < rb.l_max(); ++l) {
          for (std::size_t c = 0; c < 4; ++c) {
            const double expect = l < want.size() ? f.queries(b, want[l], c) : rsd::kRebatchPad;
            ASSERT_EQ(rb.bev_prime(b, k, l, c), expect);
          }
          for (std::size_t d = 0; d < 3; ++d) {
            for (std::size_t a = 0; a < 2; ++a) {
              const double expect =
                  l < want.size() ? f.ref2d.coords(b, k, want[l], d, a) : rsd::kRebatchPad;
              ASSERT_EQ(rb.ref2d_prime(b, k, l, d, a), expect);
            }
          }
        }
      }
    }
    ASSERT_EQ(rb.l_max(), l_max);
  }
}

TEST(Rebatch, BroadcastsUnbatchedQueries) {
  std::mt19937_64 rng(3);
  auto f = build::random_rebatch_input(rng, 2, 2, 8, 1, 3, 0.5);
  Tensor<double> q2({8, 3});
  std::copy(f.queries.slice(0).begin(), f.queries.slice(0).end(), q2.data().begin());
  auto q3 = f.queries;
  std::copy(f.queries.slice(0).begin(), f.queries.slice(0).end(), q3.slice(1).begin());
  const auto idx = rsd::extract_visible(f.mask);
  EXPECT_EQ(rsd::rebatch(q2, f.ref2d, idx).bev_prime, rsd::rebatch(q3, f.ref2d, idx).bev_prime);
}

TEST(Rebatch, ConservationAndCapacity) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto f = build::random_rebatch_input(rng, 1, 4, 30, 2, 2, 0.15);
    const auto idx = rsd::extract_visible(f.mask);
    const auto rb = rsd::rebatch(f.queries, f.ref2d, idx);
    std::size_t sum = 0;
    for (auto len : rb.lengths.data()) sum += len;
    EXPECT_EQ(sum, idx.total());
    EXPECT_LE(sum, 4 * rb.l_max());
  }
}

TEST(Rebatch, ScatterInvertsGather) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto f = build::random_rebatch_input(rng, 2, 3, 20, 2, 4, 0.3);
    const auto idx = rsd::extract_visible(f.mask);
    const auto back = rsd::scatter_back(rsd::rebatch(f.queries, f.ref2d, idx), idx, 20);
    ASSERT_EQ(back.shape(), (std::vector<std::size_t>{2, 3, 20, 4}));
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& set = idx.at(b, k);
        for (std::size_t q = 0; q < 20; ++q) {
          const bool in = std::binary_search(set.begin(), set.end(), q);
          for (std::size_t c = 0; c < 4; ++c) {
            ASSERT_EQ(back(b, k, q, c), in ? f.queries(b, q, c) : 0.0);
          }
        }
      }
    }
  }
}

TEST(Rebatch, CameraPermutationPermutesOutput) {
  std::mt19937_64 rng(6);
  auto f = build::random_rebatch_input(rng, 1, 4, 16, 2, 3, 0.3);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  Fixture g = f;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto src_m = f.mask.visible.slice(std::size_t{0}, perm[k]);
    std::copy(src_m.begin(), src_m.end(), g.mask.visible.slice(std::size_t{0}, k).begin());
    const auto src_c = f.ref2d.coords.slice(std::size_t{0}, perm[k]);
    std::copy(src_c.begin(), src_c.end(), g.ref2d.coords.slice(std::size_t{0}, k).begin());
  }
  const auto a = rsd::rebatch(f.queries, f.ref2d, rsd::extract_visible(f.mask));
  const auto b = rsd::rebatch(g.queries, g.ref2d, rsd::extract_visible(g.mask));
  ASSERT_EQ(a.l_max(), b.l_max());
  for (std::size_t k = 0; k < 4; ++k) {
    const auto x = a.bev_prime.slice(std::size_t{0}, perm[k]);
    const auto y = b.bev_prime.slice(std::size_t{0}, k);
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
    EXPECT_EQ(a.lengths(std::size_t{0}, perm[k]), b.lengths(std::size_t{0}, k));
  }
}

TEST(Rebatch, OutOfRangeIndexIsInternalError) {
  std::mt19937_64 rng(7);
  auto f = build::random_rebatch_input(rng, 1, 1, 5, 1, 2, 1.0);
  auto idx = rsd::extract_visible(f.mask);
  idx.sets[0].back() = 99;
  EXPECT_THROW(rsd::rebatch(f.queries, f.ref2d, idx), rsd::InternalError);
}

TEST(ScatterBack, DuplicateIndexIsInternalError) {
  std::mt19937_64 rng(8);
  auto f = build::random_rebatch_input(rng, 1, 1, 5, 1, 2, 1.0);
  auto idx = rsd::extract_visible(f.mask);
  const auto rb = rsd::rebatch(f.queries, f.ref2d, idx);
  idx.sets[0][1] = idx.sets[0][0];
  EXPECT_THROW(rsd::scatter_back(rb, idx, 5), rsd::InternalError);
}

TEST(IndexSetsJson, RoundTrips) {
  std::mt19937_64 rng(9);
  auto f = build::random_rebatch_input(rng, 2, 3, 12, 1, 1, 0.4);
  const auto idx = rsd::extract_visible(f.mask);
  const auto back = rsd::index_sets_from_json(rsd::index_sets_to_json(idx, {"a", "b", "c"}));
  EXPECT_EQ(back.batch, idx.batch);
  EXPECT_EQ(back.cameras, idx.cameras);
  EXPECT_EQ(back.l_max, idx.l_max);
  EXPECT_EQ(back.sets, idx.sets);
}

}  // namespace
