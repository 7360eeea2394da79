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

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace rsd {

enum class LossTerm { kMap, kMotion, kCollision, kBoundary, kDirection, kLimit, kRisk };
inline constexpr std::size_t kNumLossTerms = 7;

// Config key suffixes, in LossTerm order: loss.w_map ... loss.w_risk.
inline constexpr std::array<const char*, kNumLossTerms> kLossTermNames = {
    "map", "mot", "col", "bd", "dir", "limi", "risk"};

struct LossWeights {
  std::array<double, kNumLossTerms> w{1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};

  double& operator[](LossTerm t) { return w[static_cast<std::size_t>(t)]; }
  double operator[](LossTerm t) const { return w[static_cast<std::size_t>(t)]; }
  void validate() const;
};

struct LossBreakdown {
  std::array<double, kNumLossTerms> terms{};
  std::array<double, kNumLossTerms> weighted{};
  double total = 0.0;

  std::string to_json() const;
};

enum class RiskReduction { kSum, kMean };

// L1 discrepancy between predicted and ground-truth risk scores. kSum is
// the plain L1 norm; kMean divides by the length (0 for empty input).
double risk_loss(std::span<const double> pred, std::span<const double> gt,
                 RiskReduction reduction = RiskReduction::kSum);

// Subgradient of risk_loss w.r.t. pred: sign(pred - gt), 0 at kinks.
std::vector<double> risk_loss_grad(std::span<const double> pred,
                                   std::span<const double> gt,
                                   RiskReduction reduction = RiskReduction::kSum);

LossBreakdown total_loss(const std::array<double, kNumLossTerms>& terms,
                         const LossWeights& weights);

}  // namespace rsd
