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

#include "rsd/rebatch.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "rsd/errors.hpp"
#include "rsd/io.hpp"

namespace rsd {

std::size_t VisibleIndexSets::total() const {
  std::size_t n = 0;
  for (const auto& s : sets) n += s.size();
  return n;
}

VisibleIndexSets extract_visible(const BevMask& mask) {
  VisibleIndexSets idx;
  idx.batch = mask.batch();
  idx.cameras = mask.cameras();
  idx.sets.resize(idx.batch * idx.cameras);
  const std::size_t n_bev = mask.n_bev();
  const std::size_t depth = mask.depth();
  for (std::size_t b = 0; b < idx.batch; ++b) {
    for (std::size_t k = 0; k < idx.cameras; ++k) {
      auto& set = idx.sets[b * idx.cameras + k];
      for (std::size_t q = 0; q < n_bev; ++q) {
        const auto row = mask.visible.slice(b, k, q);
        if (std::any_of(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(depth),
                        [](std::uint8_t v) { return v != 0; })) {
          set.push_back(q);
        }
      }
      idx.l_max = std::max(idx.l_max, set.size());
    }
  }
  return idx;
}

RebatchedQueries rebatch(const Tensor<double>& queries,
                         const ProjectedPoints2D& ref2d,
                         const VisibleIndexSets& idx) {
  const auto& cshape = ref2d.coords.shape();
  if (cshape.size() != 5 || cshape[4] != 2) {
    throw InternalError("projected points must be [B, N_cam, N_BEV, D, 2]");
  }
  const std::size_t batch = cshape[0], n_cam = cshape[1], n_bev = cshape[2],
                    depth = cshape[3];
  if (idx.batch != batch || idx.cameras != n_cam) {
    throw InternalError("index sets do not match projected point shape");
  }
  const bool broadcast = queries.rank() == 2;
  if (!(queries.rank() == 2 || queries.rank() == 3)) {
    throw InternalError("BEV queries must be [N_BEV, d] or [B, N_BEV, d]");
  }
  const std::size_t q_bev = broadcast ? queries.dim(0) : queries.dim(1);
  const std::size_t dim = broadcast ? queries.dim(1) : queries.dim(2);
  if (q_bev != n_bev || (!broadcast && queries.dim(0) != batch)) {
    throw InternalError("BEV queries do not match projected point shape");
  }

  RebatchedQueries rb{Tensor<double>({batch, n_cam, idx.l_max, dim}, kRebatchPad),
                      Tensor<double>({batch, n_cam, idx.l_max, depth, 2}, kRebatchPad),
                      Tensor<std::size_t>({batch, n_cam})};
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < n_cam; ++k) {
      const auto& set = idx.at(b, k);
      if (set.size() > idx.l_max) throw InternalError("index set longer than L_max");
      rb.lengths(b, k) = set.size();
      for (std::size_t l = 0; l < set.size(); ++l) {
        const std::size_t q = set[l];
        if (q >= n_bev) throw InternalError("visible index out of range");
        const auto src = broadcast ? queries.slice(q) : queries.slice(b, q);
        std::copy(src.begin(), src.end(), rb.bev_prime.slice(b, k, l).begin());
        for (std::size_t d = 0; d < depth; ++d) {
          rb.ref2d_prime(b, k, l, d, 0) = ref2d.coords(b, k, q, d, 0);
          rb.ref2d_prime(b, k, l, d, 1) = ref2d.coords(b, k, q, d, 1);
        }
      }
    }
  }
  return rb;
}

Tensor<double> scatter_back(const RebatchedQueries& rb,
                            const VisibleIndexSets& idx, std::size_t n_bev) {
  const std::size_t batch = rb.batch(), n_cam = rb.cameras(), dim = rb.embed_dim();
  if (idx.batch != batch || idx.cameras != n_cam) {
    throw InternalError("index sets do not match rebatched tensor shape");
  }
  Tensor<double> out({batch, n_cam, n_bev, dim});
  std::vector<std::uint8_t> seen(n_bev);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < n_cam; ++k) {
      const auto& set = idx.at(b, k);
      if (set.size() != rb.lengths(b, k)) {
        throw InternalError("index set length disagrees with rebatched lengths");
      }
      std::fill(seen.begin(), seen.end(), 0);
      for (std::size_t l = 0; l < set.size(); ++l) {
        const std::size_t q = set[l];
        if (q >= n_bev) throw InternalError("visible index out of range");
        if (seen[q]) throw InternalError("duplicate index in visible set");
        seen[q] = 1;
        const auto src = rb.bev_prime.slice(b, k, l);
        std::copy(src.begin(), src.end(), out.slice(b, k, q).begin());
      }
    }
  }
  return out;
}

std::string index_sets_to_json(const VisibleIndexSets& idx,
                               const std::vector<std::string>& names) {
  nlohmann::ordered_json j;
  j["l_max"] = idx.l_max;
  j["batches"] = nlohmann::ordered_json::array();
  for (std::size_t b = 0; b < idx.batch; ++b) {
    nlohmann::ordered_json cams = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < idx.cameras; ++k) {
      nlohmann::ordered_json c;
      c["camera"] = k < names.size() ? nlohmann::ordered_json(names[k])
                                     : nlohmann::ordered_json(k);
      c["length"] = idx.at(b, k).size();
      c["indices"] = idx.at(b, k);
      cams.push_back(std::move(c));
    }
    j["batches"].push_back({{"cameras", std::move(cams)}});
  }
  return dump_json(j, -1);
}

VisibleIndexSets index_sets_from_json(std::string_view text) {
  VisibleIndexSets idx;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto& batches = j.at("batches");
    idx.batch = batches.size();
    idx.cameras = idx.batch ? batches.front().at("cameras").size() : 0;
    for (const auto& bj : batches) {
      const auto& cams = bj.at("cameras");
      if (cams.size() != idx.cameras) {
        throw ValidationError("index dump has ragged camera lists");
      }
      for (const auto& c : cams) {
        auto set = c.at("indices").get<std::vector<std::size_t>>();
        if (!std::is_sorted(set.begin(), set.end()) ||
            std::adjacent_find(set.begin(), set.end()) != set.end()) {
          throw ValidationError("index lists must be strictly increasing");
        }
        idx.l_max = std::max(idx.l_max, set.size());
        idx.sets.push_back(std::move(set));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("index dump: ") + e.what());
  }
  return idx;
}

}  // namespace rsd
