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
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rsd/tensor.hpp"

namespace rsd {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

// 8-bit grayscale raster, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(w * h, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  std::uint8_t at(std::size_t x, std::size_t y) const {
    return pixels[y * width + x];
  }
};

// Binary PGM (P5, maxval 255).
std::string encode_pgm(const GrayImage& image);
GrayImage decode_pgm(std::string_view bytes);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);

// Named tensors stored as one flat little-endian binary of doubles
// (`<base>.bin`) plus a JSON sidecar (`<base>.json`) holding names, shapes,
// offsets and a free-form "meta" object.
class TensorBundle {
 public:
  void put(std::string name, Tensor<double> tensor);
  bool contains(std::string_view name) const;
  const Tensor<double>& get(std::string_view name) const;
  const std::vector<std::pair<std::string, Tensor<double>>>& entries() const {
    return entries_;
  }

  nlohmann::ordered_json meta = nlohmann::ordered_json::object();

 private:
  std::vector<std::pair<std::string, Tensor<double>>> entries_;
};

// `base` may be given with or without a .bin/.json extension.
void write_bundle(const std::filesystem::path& base, const TensorBundle& bundle);
TensorBundle read_bundle(const std::filesystem::path& base);

// Compact JSON with a fixed number formatting, so equal values always give
// equal bytes.
std::string dump_json(const nlohmann::ordered_json& j, int indent = 2);

}  // namespace rsd
