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

#include "rsd/losses.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "rsd/errors.hpp"
#include "rsd/io.hpp"

namespace rsd {

void LossWeights::validate() const {
  for (std::size_t i = 0; i < kNumLossTerms; ++i) {
    if (!std::isfinite(w[i]) || w[i] < 0.0) {
      throw ValidationError(std::string("loss weight w_") + kLossTermNames[i] +
                            " must be finite and non-negative");
    }
  }
}

std::string LossBreakdown::to_json() const {
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < kNumLossTerms; ++i) {
    j[std::string("L_") + kLossTermNames[i]] = terms[i];
  }
  j["total"] = total;
  return dump_json(j);
}

namespace {

void check_pair(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) {
    throw ValidationError("risk vectors differ in length (" +
                          std::to_string(pred.size()) + " vs " +
                          std::to_string(gt.size()) + ")");
  }
}

}  // namespace

double risk_loss(std::span<const double> pred, std::span<const double> gt,
                 RiskReduction reduction) {
  check_pair(pred, gt);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - gt[i]);
  if (reduction == RiskReduction::kMean && !pred.empty()) {
    sum /= static_cast<double>(pred.size());
  }
  return sum;
}

std::vector<double> risk_loss_grad(std::span<const double> pred,
                                   std::span<const double> gt,
                                   RiskReduction reduction) {
  check_pair(pred, gt);
  const double scale = reduction == RiskReduction::kMean && !pred.empty()
                           ? 1.0 / static_cast<double>(pred.size())
                           : 1.0;
  std::vector<double> g(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = pred[i] - gt[i];
    g[i] = diff > 0 ? scale : (diff < 0 ? -scale : 0.0);
  }
  return g;
}

LossBreakdown total_loss(const std::array<double, kNumLossTerms>& terms,
                         const LossWeights& weights) {
  weights.validate();
  LossBreakdown out;
  for (std::size_t i = 0; i < kNumLossTerms; ++i) {
    if (!std::isfinite(terms[i]) || terms[i] < 0.0) {
      throw ValidationError(std::string("loss term L_") + kLossTermNames[i] +
                            " must be finite and non-negative");
    }
    out.terms[i] = terms[i];
    out.weighted[i] = weights.w[i] * terms[i];
    out.total += out.weighted[i];
  }
  return out;
}

}  // namespace rsd
