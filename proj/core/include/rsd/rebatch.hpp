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

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rsd/geometry.hpp"
#include "rsd/tensor.hpp"

namespace rsd {

// Per (batch, camera) ascending list of BEV query indices with at least one
// visible height sample.
struct VisibleIndexSets {
  std::size_t batch = 0;
  std::size_t cameras = 0;
  std::size_t l_max = 0;
  std::vector<std::vector<std::size_t>> sets;  // index b * cameras + k

  const std::vector<std::size_t>& at(std::size_t b, std::size_t k) const {
    return sets.at(b * cameras + k);
  }
  std::size_t total() const;
};

inline constexpr double kRebatchPad = 0.0;

struct RebatchedQueries {
  Tensor<double> bev_prime;          // [B, N_cam, L_max, d]
  Tensor<double> ref2d_prime;        // [B, N_cam, L_max, D, 2]
  Tensor<std::size_t> lengths;       // [B, N_cam]

  std::size_t batch() const { return bev_prime.dim(0); }
  std::size_t cameras() const { return bev_prime.dim(1); }
  std::size_t l_max() const { return bev_prime.dim(2); }
  std::size_t embed_dim() const { return bev_prime.dim(3); }
  std::size_t depth() const { return ref2d_prime.dim(3); }
};

VisibleIndexSets extract_visible(const BevMask& mask);

// `queries` is [B, N_BEV, d] (a [N_BEV, d] tensor is broadcast over the
// batch). Throws InternalError when an index is out of range.
RebatchedQueries rebatch(const Tensor<double>& queries,
                         const ProjectedPoints2D& ref2d,
                         const VisibleIndexSets& idx);

// Inverse of the gather: [B, N_cam, N_BEV, d], zeros outside the index sets.
// Throws InternalError on duplicate indices within one camera.
Tensor<double> scatter_back(const RebatchedQueries& rb,
                            const VisibleIndexSets& idx, std::size_t n_bev);

// Debug dump: {"l_max", "batches": [{"cameras": [{"camera", "length",
// "indices": [...]}]}]}.
std::string index_sets_to_json(const VisibleIndexSets& idx,
                               const std::vector<std::string>& camera_names = {});
VisibleIndexSets index_sets_from_json(std::string_view text);

}  // namespace rsd
