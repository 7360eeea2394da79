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
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rsd/geometry.hpp"
#include "rsd/io.hpp"

namespace rsd {

// Rewrites the relaxed JSON that language models tend to emit (single
// quotes, Python literals, missing commas between members, trailing
// commas) into strict JSON. Each repair is described in `repairs`.
// Throws ParseError on anything it cannot tokenize.
std::string relax_json(std::string_view text, std::vector<std::string>* repairs = nullptr);

// One labelme-style rectangle from the visual-grounding model.
struct VgDetection {
  std::string label;
  std::array<Vec2, 2> points{};  // normalized so points[0] < points[1]
  std::string shape_type = "rectangle";
  std::string description;       // "score: <real>"
  nlohmann::ordered_json group_id = nullptr;
  nlohmann::ordered_json flags = nlohmann::ordered_json::object();

  double score() const;
  // Throws ValidationError naming the offending field.
  void validate() const;
};

// Accepts a single record or an array of records.
std::vector<VgDetection> parse_vg_detections(std::string_view text);
// Compact, key order label/points/group_id/shape_type/description/flags.
std::string vg_detections_to_json(std::span<const VgDetection> detections);

struct PromptBundle {
  std::string task_description;
  std::string state_info;
  std::string output_format;

  std::string render() const;
};

PromptBundle render_prompt(std::span<const VgDetection> detections);

enum class RiskLevel { kHigh, kMedium, kLow };

std::string_view to_string(RiskLevel level);

struct RiskAnnotationEntry {
  std::string rank_key;
  int category_id = 0;
  std::array<double, 4> bbox{};  // [x1, y1, x2, y2] pixels
  double risk_score = 0.0;
  RiskLevel risk_level = RiskLevel::kLow;
  std::string category_name;
  std::string reason;

  friend bool operator==(const RiskAnnotationEntry&, const RiskAnnotationEntry&) = default;
};

// high requires score >= 0.7, low requires score <= 0.3, medium requires
// 0.3 < score < 0.7.
bool level_matches_score(RiskLevel level, double score);

// Open-vocabulary category ids; extensible at runtime.
class CategoryTable {
 public:
  CategoryTable();

  std::optional<int> id_of(std::string_view name) const;
  void set(std::string name, int id);
  const std::map<std::string, int, std::less<>>& entries() const { return ids_; }

 private:
  std::map<std::string, int, std::less<>> ids_;
};

struct ImageBounds {
  double width = 0.0;
  double height = 0.0;
};

struct ParsedAnnotations {
  std::vector<RiskAnnotationEntry> entries;  // in rank order
  std::vector<std::string> warnings;
};

// Parses the rank-keyed VLM output. Keys sorted numerically are the
// ranking and must be exactly 0..n-1. Malformed text throws ParseError;
// rule violations throw ValidationError listing every offending entry.
ParsedAnnotations parse_vlm_output(std::string_view text,
                                   std::optional<ImageBounds> bounds = std::nullopt,
                                   const CategoryTable& categories = CategoryTable());

std::string serialize_annotations(std::span<const RiskAnnotationEntry> entries);

struct RankWarning {
  std::size_t first = 0;
  std::size_t second = 0;
  double first_score = 0.0;
  double second_score = 0.0;

  std::string message() const;
};

// One warning per adjacent pair whose scores rise along the ranking.
std::vector<RankWarning> check_rank_score_consistency(
    std::span<const RiskAnnotationEntry> entries);

struct MaskDrawing {
  GrayImage mask;
  std::vector<std::string> warnings;
};

// Fills each bbox (pixels [floor(x1), ceil(x2)) x [floor(y1), ceil(y2)))
// with round(255 * risk_score); overlaps keep the maximum.
MaskDrawing draw_semantic_mask(std::span<const RiskAnnotationEntry> entries,
                               std::size_t width, std::size_t height);

struct AnnotationRecord {
  std::string vg_text;
  std::string vlm_text;
};

// Seam for the grounding + language model services.
class AnnotationClient {
 public:
  virtual ~AnnotationClient() = default;
  virtual AnnotationRecord fetch(const std::string& frame_id) const = 0;
};

// Serves recorded responses from <dir>/<frame>.vg.json and
// <dir>/<frame>.vlm.json, unmodified.
class FixtureReplayClient : public AnnotationClient {
 public:
  explicit FixtureReplayClient(std::filesystem::path dir);

  AnnotationRecord fetch(const std::string& frame_id) const override;
  std::vector<std::string> frame_ids() const;

 private:
  std::filesystem::path dir_;
};

}  // namespace rsd
