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

#include <random>
#include <vector>

#include "oracles.hpp"
#include "rsd/errors.hpp"
#include "rsd/losses.hpp"

namespace {

using Terms = std::array<double, rsd::kNumLossTerms>;

std::vector<double> random_scores(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

TEST(RiskLoss, IdenticalVectorsGiveZero) {
  const std::vector<double> a{0.1, 0.5, 0.9};
  EXPECT_EQ(rsd::risk_loss(a, a), 0.0);
}

TEST(RiskLoss, HandSum) {
  const std::vector<double> pred{0.9, 0.2}, gt{0.7, 0.5};
  EXPECT_NEAR(rsd::risk_loss(pred, gt), 0.5, 1e-15);
}

TEST(RiskLoss, EmptyVectorsGiveZero) {
  const std::vector<double> e;
  EXPECT_EQ(rsd::risk_loss(e, e), 0.0);
  EXPECT_EQ(rsd::risk_loss(e, e, rsd::RiskReduction::kMean), 0.0);
}

TEST(RiskLoss, MeanVariantDividesByLength) {
  const std::vector<double> pred{0.9, 0.2}, gt{0.7, 0.5};
  EXPECT_NEAR(rsd::risk_loss(pred, gt, rsd::RiskReduction::kMean), 0.25, 1e-15);
}

TEST(RiskLoss, LengthMismatchIsValidationError) {
  const std::vector<double> a{0.1}, b{0.1, 0.2};
  EXPECT_THROW(rsd::risk_loss(a, b), rsd::ValidationError);
  EXPECT_THROW(rsd::risk_loss_grad(a, b), rsd::ValidationError);
}

TEST(RiskLoss, IsAMetric) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = random_scores(rng, 6), b = random_scores(rng, 6), c = random_scores(rng, 6);
    const double ab = rsd::risk_loss(a, b);
    EXPECT_GE(ab, 0.0);
    EXPECT_EQ(ab, rsd::risk_loss(b, a));
    EXPECT_LE(rsd::risk_loss(a, c), ab + rsd::risk_loss(b, c) + 1e-12);
  }
}

TEST(RiskLoss, SubgradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(32);
  for (auto reduction : {rsd::RiskReduction::kSum, rsd::RiskReduction::kMean}) {
    for (int trial = 0; trial < 50; ++trial) {
      const auto pred = random_scores(rng, 5), gt = random_scores(rng, 5);
      bool near_kink = false;
      for (std::size_t i = 0; i < 5; ++i) near_kink = near_kink || std::abs(pred[i] - gt[i]) < 1e-3;
      if (near_kink) continue;
      const auto g = rsd::risk_loss_grad(pred, gt, reduction);
      const auto r = oracle::central_difference(
          [&](const std::vector<double>& x) { return rsd::risk_loss(x, gt, reduction); }, pred, g);
      ASSERT_LE(r.max_rel, 1e-8);
    }
  }
}

TEST(RiskLoss, SubgradientIsZeroAtKink) {
  const std::vector<double> a{0.4};
  EXPECT_EQ(rsd::risk_loss_grad(a, a)[0], 0.0);
}

TEST(TotalLoss, ZeroWeightsGiveZero) {
  rsd::LossWeights w;
  w.w.fill(0.0);
  EXPECT_EQ(rsd::total_loss({1, 2, 3, 4, 5, 6, 7}, w).total, 0.0);
}

TEST(TotalLoss, UnitWeightsSumTerms) {
  Terms ones;
  ones.fill(1.0);
  EXPECT_EQ(rsd::total_loss(ones, {}).total, 7.0);
}

TEST(TotalLoss, WeightedCombination) {
  rsd::LossWeights w;
  w.w = {1, 2, 0, 0, 0, 0, 3};
  const auto b = rsd::total_loss({0.5, 0.25, 9, 9, 9, 9, 1}, w);
  EXPECT_NEAR(b.total, 4.0, 1e-12);
  EXPECT_EQ(b.weighted[6], 3.0);
  EXPECT_EQ(b.terms[2], 9.0);
}

TEST(TotalLoss, LinearAndHomogeneous) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    Terms t;
    rsd::LossWeights w, w2;
    for (std::size_t i = 0; i < rsd::kNumLossTerms; ++i) {
      t[i] = u(rng);
      w.w[i] = u(rng);
    }
    const double c = u(rng);
    for (std::size_t i = 0; i < rsd::kNumLossTerms; ++i) w2.w[i] = c * w.w[i];
    const double base = rsd::total_loss(t, w).total;
    EXPECT_NEAR(rsd::total_loss(t, w2).total, c * base, 1e-12);
    // Bumping one weight moves the total by exactly that weight times its term.
    const std::size_t k = trial % rsd::kNumLossTerms;
    auto w3 = w;
    w3.w[k] += 0.5;
    EXPECT_NEAR(rsd::total_loss(t, w3).total, base + 0.5 * t[k], 1e-12);
  }
}

TEST(TotalLoss, RejectsNegativeOrNonFinite) {
  EXPECT_THROW(rsd::total_loss({-1, 0, 0, 0, 0, 0, 0}, {}), rsd::ValidationError);
  EXPECT_THROW(rsd::total_loss({0, 0, 0, 0, 0, 0, NAN}, {}), rsd::ValidationError);
  rsd::LossWeights w;
  w[rsd::LossTerm::kRisk] = -0.1;
  EXPECT_THROW(rsd::total_loss({}, w), rsd::ValidationError);
}

TEST(LossBreakdown, JsonNamesEveryTerm) {
  const auto j = rsd::total_loss({1, 0, 0, 0, 0, 0, 2}, {}).to_json();
  for (const char* key : {"L_map", "L_mot", "L_col", "L_bd", "L_dir", "L_limi", "L_risk", "total"}) {
    EXPECT_NE(j.find(key), std::string::npos) << key;
  }
}

}  // namespace
