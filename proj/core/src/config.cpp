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

#include "rsd/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <vector>

#include "rsd/errors.hpp"
#include "rsd/io.hpp"

namespace rsd {

namespace {

struct Value {
  enum Kind { kInt, kReal, kBool, kString } kind = kInt;
  long long i = 0;
  double r = 0.0;
  bool b = false;
  std::string s;
  std::string raw;
};

struct Key {
  std::string name;
  std::function<void(const Value&)> set;
  std::function<std::string()> get;
};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

Value parse_value(const std::string& raw) {
  Value v;
  v.raw = raw;
  if (raw.empty()) throw ParseError("missing value");
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') throw ParseError("unterminated string");
    v.kind = Value::kString;
    v.s = raw.substr(1, raw.size() - 2);
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = Value::kBool;
    v.b = raw == "true";
    return v;
  }
  const char* begin = raw.data();
  const char* end = raw.data() + raw.size();
  if (*begin == '+') ++begin;
  {
    long long i = 0;
    const auto [ptr, ec] = std::from_chars(begin, end, i);
    if (ec == std::errc() && ptr == end) {
      v.kind = Value::kInt;
      v.i = i;
      v.r = static_cast<double>(i);
      return v;
    }
  }
  double r = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, r);
  if (ec != std::errc() || ptr != end) throw ParseError("cannot parse value '" + raw + "'");
  v.kind = Value::kReal;
  v.r = r;
  return v;
}

// Shortest text that reads back to the same double.
std::string fmt_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

Key size_key(std::string name, std::size_t& field) {
  return {name,
          [&field, name](const Value& v) {
            if (v.kind != Value::kInt || v.i < 0) {
              throw ValidationError(name + " must be a non-negative integer");
            }
            field = static_cast<std::size_t>(v.i);
          },
          [&field] { return std::to_string(field); }};
}

Key int_key(std::string name, int& field) {
  return {name,
          [&field, name](const Value& v) {
            if (v.kind != Value::kInt) throw ValidationError(name + " must be an integer");
            field = static_cast<int>(v.i);
          },
          [&field] { return std::to_string(field); }};
}

Key u64_key(std::string name, std::uint64_t& field) {
  return {name,
          [&field, name](const Value& v) {
            if (v.kind != Value::kInt || v.i < 0) {
              throw ValidationError(name + " must be a non-negative integer");
            }
            field = static_cast<std::uint64_t>(v.i);
          },
          [&field] { return std::to_string(field); }};
}

Key real_key(std::string name, double& field) {
  return {name,
          [&field, name](const Value& v) {
            if (v.kind != Value::kInt && v.kind != Value::kReal) {
              throw ValidationError(name + " must be a number");
            }
            field = v.r;
          },
          [&field] { return fmt_real(field); }};
}

Key bool_key(std::string name, bool& field) {
  return {name,
          [&field, name](const Value& v) {
            if (v.kind != Value::kBool) throw ValidationError(name + " must be true or false");
            field = v.b;
          },
          [&field] { return std::string(field ? "true" : "false"); }};
}

template <typename E>
Key enum_key(std::string name, E& field, std::vector<std::pair<std::string, E>> names) {
  return {name,
          [&field, name, names](const Value& v) {
            if (v.kind == Value::kString) {
              for (const auto& [n, e] : names) {
                if (n == v.s) {
                  field = e;
                  return;
                }
              }
            }
            std::string allowed;
            for (const auto& [n, e] : names) allowed += (allowed.empty() ? "" : ", ") + n;
            throw ValidationError(name + " must be one of: " + allowed);
          },
          [&field, names] {
            for (const auto& [n, e] : names) {
              if (e == field) return "\"" + n + "\"";
            }
            return std::string("\"\"");
          }};
}

std::vector<Key> keys_of(RunConfig& c) {
  std::vector<Key> k;
  k.push_back(size_key("bev.rows", c.bev_rows));
  k.push_back(size_key("bev.cols", c.bev_cols));
  k.push_back(size_key("bev.z_samples", c.z_samples));
  k.push_back(size_key("bev.embed_dim", c.embed_dim));
  k.push_back(real_key("range.x_min", c.range.x_min));
  k.push_back(real_key("range.x_max", c.range.x_max));
  k.push_back(real_key("range.y_min", c.range.y_min));
  k.push_back(real_key("range.y_max", c.range.y_max));
  k.push_back(real_key("range.z_min", c.range.z_min));
  k.push_back(real_key("range.z_max", c.range.z_max));
  k.push_back(real_key("geometry.depth_eps", c.depth_eps));
  k.push_back(size_key("pv.height", c.pv_height));
  k.push_back(size_key("pv.width", c.pv_width));
  k.push_back(size_key("attn.n_heads", c.n_heads));
  k.push_back(size_key("attn.n_points", c.n_points));
  k.push_back(size_key("attn.n_ref", c.n_ref));
  k.push_back(real_key("attn.offset_scale", c.offset_scale));
  k.push_back(real_key("decode.threshold", c.threshold));
  for (std::size_t t = 0; t < kNumLossTerms; ++t) {
    k.push_back(real_key(std::string("loss.w_") + kLossTermNames[t], c.loss_weights.w[t]));
  }
  k.push_back(enum_key<RiskReduction>("loss.risk_reduction", c.risk_reduction,
                                      {{"sum", RiskReduction::kSum},
                                       {"mean", RiskReduction::kMean}}));
  k.push_back(enum_key<SpatialError>("metrics.spatial_error", c.spatial_error,
                                     {{"size", SpatialError::kSize},
                                      {"position", SpatialError::kPosition}}));
  k.push_back(enum_key<DiffRiskNumerator>(
      "metrics.diff_risk", c.diff_risk,
      {{"frobenius", DiffRiskNumerator::kFrobenius},
       {"elementwise", DiffRiskNumerator::kElementwiseMean}}));
  k.push_back(real_key("metrics.risk_iou", c.risk_iou));
  k.push_back(size_key("scene.cameras", c.cameras));
  k.push_back(real_key("scene.camera_yaw_step_deg", c.camera_yaw_step_deg));
  k.push_back(int_key("scene.image_width", c.image_width));
  k.push_back(int_key("scene.image_height", c.image_height));
  k.push_back(real_key("scene.focal", c.focal));
  k.push_back(real_key("scene.camera_height", c.camera_height));
  k.push_back(bool_key("dump.pgm", c.dump_pgm));
  k.push_back(bool_key("dump.indices", c.dump_indices));
  k.push_back(bool_key("dump.loss", c.dump_loss));
  k.push_back(u64_key("seed", c.seed));
  return k;
}

// Strips a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

}  // namespace

void RunConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ValidationError(std::string(name) + " must be positive");
  };
  positive(bev_rows, "bev.rows");
  positive(bev_cols, "bev.cols");
  positive(z_samples, "bev.z_samples");
  positive(embed_dim, "bev.embed_dim");
  positive(pv_height, "pv.height");
  positive(pv_width, "pv.width");
  positive(n_heads, "attn.n_heads");
  positive(n_points, "attn.n_points");
  positive(n_ref, "attn.n_ref");
  positive(cameras, "scene.cameras");
  range.validate();
  if (!(depth_eps > 0.0) || !std::isfinite(depth_eps)) {
    throw ValidationError("geometry.depth_eps must be a positive real");
  }
  if (embed_dim % n_heads != 0) {
    throw ValidationError("bev.embed_dim must be divisible by attn.n_heads");
  }
  if (!std::isfinite(offset_scale)) throw ValidationError("attn.offset_scale must be finite");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ValidationError("decode.threshold must lie in (0, 1)");
  }
  loss_weights.validate();
  if (!(risk_iou > 0.0 && risk_iou <= 1.0)) {
    throw ValidationError("metrics.risk_iou must lie in (0, 1]");
  }
  if (image_width <= 0 || image_height <= 0) {
    throw ValidationError("scene image size must be positive");
  }
  if (!(focal > 0.0) || !std::isfinite(focal)) {
    throw ValidationError("scene.focal must be a positive real");
  }
  if (!std::isfinite(camera_yaw_step_deg) || !std::isfinite(camera_height)) {
    throw ValidationError("scene camera placement must be finite");
  }
}

RiskHeadShape RunConfig::head_shape() const {
  RiskHeadShape s;
  s.views = cameras;
  s.pv_height = pv_height;
  s.pv_width = pv_width;
  s.embed_dim = embed_dim;
  s.n_heads = n_heads;
  s.n_points = n_points;
  s.n_ref = n_ref;
  s.threshold = threshold;
  return s;
}

BevGrid RunConfig::bev_grid() const {
  BevGrid g;
  g.rows = bev_rows;
  g.cols = bev_cols;
  g.range = range;
  g.z_samples = z_samples;
  g.embed_dim = embed_dim;
  return g;
}

EvalOptions RunConfig::eval_options() const {
  EvalOptions o;
  o.spatial = spatial_error;
  o.diff_risk = diff_risk;
  o.risk_iou = risk_iou;
  return o;
}

CategoryTable RunConfig::category_table() const {
  CategoryTable t;
  for (const auto& [name, id] : categories) t.set(name, id);
  return t;
}

namespace {

constexpr std::string_view kCategoryPrefix = "categories.";

std::string category_from_key(std::string_view key) {
  std::string name(key.substr(kCategoryPrefix.size()));
  std::replace(name.begin(), name.end(), '_', ' ');
  return name;
}

std::string category_to_key(const std::string& name) {
  std::string key(name);
  std::replace(key.begin(), key.end(), ' ', '_');
  return std::string(kCategoryPrefix) + key;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  auto keys = keys_of(cfg);
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw_line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string line = trim(strip_comment(raw_line));
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(where + "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + "expected 'key = value'");
    std::string name = trim(std::string_view(line).substr(0, eq));
    if (name.empty()) throw ParseError(where + "missing key");
    if (!section.empty()) name = section + "." + name;
    Value v;
    try {
      v = parse_value(trim(std::string_view(line).substr(eq + 1)));
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
    if (name.size() > kCategoryPrefix.size() && name.rfind(kCategoryPrefix, 0) == 0) {
      if (v.kind != Value::kInt || v.i < 0 || v.i > 1000000) {
        throw ValidationError(where + name + " must be a non-negative integer id");
      }
      cfg.categories[category_from_key(name)] = static_cast<int>(v.i);
      continue;
    }
    bool found = false;
    for (auto& k : keys) {
      if (k.name == name) {
        try {
          k.set(v);
        } catch (const ValidationError& e) {
          throw ValidationError(where + e.what());
        }
        found = true;
        break;
      }
    }
    if (!found) throw ValidationError(where + "unknown key '" + name + "'");
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path));
}

std::string config_to_toml(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::string out;
  for (const auto& k : keys_of(copy)) out += k.name + " = " + k.get() + "\n";
  for (const auto& [name, id] : cfg.categories) {
    out += category_to_key(name) + " = " + std::to_string(id) + "\n";
  }
  return out;
}

}  // namespace rsd
