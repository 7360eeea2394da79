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

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rsd/errors.hpp"
#include "rsd/io.hpp"

namespace rsd {

static_assert(std::endian::native == std::endian::little,
              "tensor bundles are written in host order, which must be little-endian");

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

std::string encode_pgm(const GrayImage& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()),
             image.pixels.size());
  return out;
}

GrayImage decode_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::size_t start = pos;
    while (pos < bytes.size() &&
           !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    }
    return std::string(bytes.substr(start, pos - start));
  };
  if (next_token() != "P5") throw ParseError("not a binary PGM (P5)");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token());
    h = std::stoul(next_token());
    maxval = std::stoul(next_token());
  } catch (const std::exception&) {
    throw ParseError("malformed PGM header");
  }
  if (maxval != 255) throw ParseError("only maxval 255 PGM is supported");
  ++pos;  // single whitespace after maxval
  if (bytes.size() < pos || bytes.size() - pos != w * h) {
    throw ParseError("PGM payload size mismatch");
  }
  GrayImage img(w, h);
  std::memcpy(img.pixels.data(), bytes.data() + pos, w * h);
  return img;
}

void write_pgm(const fs::path& path, const GrayImage& image) {
  write_file(path, encode_pgm(image));
}

GrayImage read_pgm(const fs::path& path) { return decode_pgm(read_file(path)); }

void TensorBundle::put(std::string name, Tensor<double> tensor) {
  for (auto& [n, t] : entries_) {
    if (n == name) {
      t = std::move(tensor);
      return;
    }
  }
  entries_.emplace_back(std::move(name), std::move(tensor));
}

bool TensorBundle::contains(std::string_view name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return true;
  }
  return false;
}

const Tensor<double>& TensorBundle::get(std::string_view name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw NotFoundError("tensor '" + std::string(name) + "' not in bundle");
}

namespace {

fs::path strip_ext(const fs::path& base) {
  if (base.extension() == ".bin" || base.extension() == ".json") {
    fs::path p = base;
    p.replace_extension();
    return p;
  }
  return base;
}

fs::path with_suffix(const fs::path& base, const char* suffix) {
  return fs::path(base.string() + suffix);
}

}  // namespace

void write_bundle(const fs::path& base_in, const TensorBundle& bundle) {
  const fs::path base = strip_ext(base_in);
  nlohmann::ordered_json side;
  side["format"] = "rsd-tensor-bundle";
  side["dtype"] = "f64le";
  side["tensors"] = nlohmann::ordered_json::array();
  std::string payload;
  std::size_t offset = 0;
  for (const auto& [name, t] : bundle.entries()) {
    side["tensors"].push_back(
        {{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    payload.append(reinterpret_cast<const char*>(t.data().data()),
                   t.size() * sizeof(double));
    offset += t.size();
  }
  side["meta"] = bundle.meta;
  write_file(with_suffix(base, ".bin"), payload);
  write_file(with_suffix(base, ".json"), dump_json(side) + "\n");
}

TensorBundle read_bundle(const fs::path& base_in) {
  const fs::path base = strip_ext(base_in);
  nlohmann::ordered_json side;
  try {
    side = nlohmann::ordered_json::parse(read_file(with_suffix(base, ".json")));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bundle sidecar " + base.string() + ".json: " + e.what());
  }
  const std::string payload = read_file(with_suffix(base, ".bin"));
  if (payload.size() % sizeof(double) != 0) {
    throw ParseError("bundle payload is not a whole number of doubles");
  }
  const std::size_t n_values = payload.size() / sizeof(double);
  TensorBundle bundle;
  try {
    for (const auto& entry : side.at("tensors")) {
      auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const std::size_t count = Tensor<double>::count(shape);
      if (offset + count > n_values) {
        throw ParseError("tensor '" + entry.at("name").get<std::string>() +
                         "' runs past the end of the payload");
      }
      std::vector<double> data(count);
      std::memcpy(data.data(), payload.data() + offset * sizeof(double),
                  count * sizeof(double));
      bundle.put(entry.at("name").get<std::string>(),
                 Tensor<double>(std::move(shape), std::move(data)));
    }
    if (side.contains("meta")) bundle.meta = side.at("meta");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bundle sidecar " + base.string() + ".json: " + e.what());
  }
  return bundle;
}

std::string dump_json(const nlohmann::ordered_json& j, int indent) {
  return j.dump(indent);
}

}  // namespace rsd
