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

#include "rsd/annotation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "rsd/errors.hpp"
#include "rsd/prompt_text.hpp"

namespace rsd {

using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Relaxed JSON

namespace {

enum class Tok { kString, kNumber, kLiteral, kOpen, kClose, kColon, kComma };

struct Token {
  Tok kind;
  std::string text;  // strict-JSON spelling
  std::size_t offset;
};

bool is_value_start(Tok t) {
  return t == Tok::kString || t == Tok::kNumber || t == Tok::kLiteral || t == Tok::kOpen;
}
bool is_value_end(Tok t) {
  return t == Tok::kString || t == Tok::kNumber || t == Tok::kLiteral || t == Tok::kClose;
}

std::string quote_json(const std::string& raw) { return ordered_json(raw).dump(); }

std::vector<Token> tokenize(std::string_view s, bool& converted_quotes) {
  std::vector<Token> toks;
  std::size_t i = 0;
  auto fail = [&](const std::string& why) {
    throw ParseError("malformed JSON at offset " + std::to_string(i) + ": " + why);
  };
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (c == '"' || c == '\'') {
      const char q = c;
      std::string content;
      ++i;
      bool closed = false;
      while (i < s.size()) {
        const char ch = s[i];
        if (ch == '\\') {
          if (i + 1 >= s.size()) fail("dangling escape");
          const char nx = s[i + 1];
          switch (nx) {
            case 'n': content += '\n'; break;
            case 't': content += '\t'; break;
            case 'r': content += '\r'; break;
            case 'b': content += '\b'; break;
            case 'f': content += '\f'; break;
            case '/': content += '/'; break;
            case '\\': content += '\\'; break;
            case '"': content += '"'; break;
            case '\'': content += '\''; break;
            case 'u': {
              if (i + 5 >= s.size()) fail("short \\u escape");
              // Let the strict parser decode it.
              ordered_json decoded;
              try {
                decoded = ordered_json::parse("\"" + std::string(s.substr(i, 6)) + "\"");
              } catch (const nlohmann::json::exception&) {
                fail("bad \\u escape");
              }
              content += decoded.get<std::string>();
              i += 4;
              break;
            }
            default: fail("unknown escape");
          }
          i += 2;
          continue;
        }
        if (ch == q) {
          closed = true;
          ++i;
          break;
        }
        content += ch;
        ++i;
      }
      if (!closed) fail("unterminated string");
      if (q == '\'') converted_quotes = true;
      try {
        toks.push_back({Tok::kString, quote_json(content), start});
      } catch (const nlohmann::json::exception&) {
        fail("string is not valid UTF-8");
      }
      continue;
    }
    if (c == '-' || c == '+' || c == '.' || std::isdigit(static_cast<unsigned char>(c))) {
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) ||
                              s[i] == '.' || s[i] == '-' || s[i] == '+')) {
        ++i;
      }
      std::string num(s.substr(start, i - start));
      if (!num.empty() && num[0] == '+') num.erase(0, 1);
      toks.push_back({Tok::kNumber, num, start});
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      while (i < s.size() && std::isalnum(static_cast<unsigned char>(s[i]))) ++i;
      const std::string word(s.substr(start, i - start));
      std::string lit;
      if (word == "true" || word == "True") lit = "true";
      else if (word == "false" || word == "False") lit = "false";
      else if (word == "null" || word == "None") lit = "null";
      else fail("unexpected identifier '" + word + "'");
      toks.push_back({Tok::kLiteral, lit, start});
      continue;
    }
    switch (c) {
      case '{':
      case '[': toks.push_back({Tok::kOpen, std::string(1, c), start}); break;
      case '}':
      case ']': toks.push_back({Tok::kClose, std::string(1, c), start}); break;
      case ':': toks.push_back({Tok::kColon, ":", start}); break;
      case ',': toks.push_back({Tok::kComma, ",", start}); break;
      default: fail(std::string("unexpected character '") + c + "'");
    }
    ++i;
  }
  return toks;
}

}  // namespace

std::string relax_json(std::string_view text, std::vector<std::string>* repairs) {
  bool converted_quotes = false;
  const auto toks = tokenize(text, converted_quotes);
  std::string out;
  int depth = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const Token& t = toks[i];
    if (t.kind == Tok::kComma && i + 1 < toks.size() && toks[i + 1].kind == Tok::kClose) {
      if (repairs) {
        repairs->push_back("removed trailing comma at offset " + std::to_string(t.offset));
      }
      continue;
    }
    if (i > 0 && depth > 0 && is_value_end(toks[i - 1].kind) && is_value_start(t.kind)) {
      out += ',';
      if (repairs) {
        repairs->push_back("inserted missing comma at offset " + std::to_string(t.offset));
      }
    }
    if (t.kind == Tok::kOpen) ++depth;
    if (t.kind == Tok::kClose) --depth;
    out += t.text;
  }
  if (converted_quotes && repairs) {
    repairs->insert(repairs->begin(), "converted single-quoted strings");
  }
  return out;
}

namespace {

ordered_json parse_relaxed(std::string_view text, std::vector<std::string>* repairs) {
  const std::string strict = relax_json(text, repairs);
  try {
    return ordered_json::parse(strict);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
}

double json_number(const ordered_json& j, const std::string& field) {
  if (!j.is_number()) throw ValidationError("field '" + field + "' must be a number");
  return j.get<double>();
}

std::string json_string(const ordered_json& j, const std::string& field) {
  if (!j.is_string()) throw ValidationError("field '" + field + "' must be a string");
  return j.get<std::string>();
}

}  // namespace

// ---------------------------------------------------------------------------
// Visual grounding records

double VgDetection::score() const {
  static constexpr std::string_view kPrefix = "score:";
  std::string_view d = description;
  if (d.substr(0, kPrefix.size()) != kPrefix) {
    throw ValidationError("field 'description' must read 'score: <real>'");
  }
  d.remove_prefix(kPrefix.size());
  while (!d.empty() && d.front() == ' ') d.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(d.data(), d.data() + d.size(), v);
  if (ec != std::errc() || ptr != d.data() + d.size()) {
    throw ValidationError("field 'description' must read 'score: <real>'");
  }
  return v;
}

void VgDetection::validate() const {
  if (label.empty()) throw ValidationError("field 'label' must be non-empty");
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw ValidationError("field 'points' must be finite");
    }
  }
  if (!(points[0].x < points[1].x) || !(points[0].y < points[1].y)) {
    throw ValidationError("field 'points' must span a non-empty rectangle");
  }
  if (shape_type != "rectangle") {
    throw ValidationError("field 'shape_type' must be 'rectangle'");
  }
  const double s = score();
  if (!(s >= 0.0 && s <= 1.0)) {
    throw ValidationError("field 'description' score must lie in [0, 1]");
  }
}

std::vector<VgDetection> parse_vg_detections(std::string_view text) {
  const ordered_json doc = parse_relaxed(text, nullptr);
  std::vector<ordered_json> records;
  if (doc.is_array()) {
    records.assign(doc.begin(), doc.end());
  } else if (doc.is_object()) {
    records.push_back(doc);
  } else {
    throw ValidationError("visual grounding file must hold an object or an array");
  }
  std::vector<VgDetection> out;
  for (const auto& r : records) {
    if (!r.is_object()) throw ValidationError("visual grounding record must be an object");
    VgDetection d;
    if (!r.contains("label")) throw ValidationError("field 'label' is missing");
    d.label = json_string(r.at("label"), "label");
    if (!r.contains("points") || !r.at("points").is_array() || r.at("points").size() != 2) {
      throw ValidationError("field 'points' must hold two corners");
    }
    Vec2 c[2];
    for (int k = 0; k < 2; ++k) {
      const auto& p = r.at("points")[static_cast<std::size_t>(k)];
      if (!p.is_array() || p.size() != 2) {
        throw ValidationError("field 'points' corners must be [x, y]");
      }
      c[k] = {json_number(p[0], "points"), json_number(p[1], "points")};
    }
    d.points = {Vec2{std::min(c[0].x, c[1].x), std::min(c[0].y, c[1].y)},
                Vec2{std::max(c[0].x, c[1].x), std::max(c[0].y, c[1].y)}};
    d.shape_type = r.contains("shape_type") ? json_string(r.at("shape_type"), "shape_type")
                                            : "rectangle";
    if (!r.contains("description")) throw ValidationError("field 'description' is missing");
    d.description = json_string(r.at("description"), "description");
    d.group_id = r.value("group_id", ordered_json(nullptr));
    d.flags = r.value("flags", ordered_json::object());
    d.validate();
    out.push_back(std::move(d));
  }
  return out;
}

std::string vg_detections_to_json(std::span<const VgDetection> detections) {
  ordered_json arr = ordered_json::array();
  for (const auto& d : detections) {
    arr.push_back({{"label", d.label},
                   {"points",
                    {{d.points[0].x, d.points[0].y}, {d.points[1].x, d.points[1].y}}},
                   {"group_id", d.group_id},
                   {"shape_type", d.shape_type},
                   {"description", d.description},
                   {"flags", d.flags}});
  }
  return arr.dump();
}

std::string PromptBundle::render() const {
  return task_description + "\n\n" + state_info + "\n\n" + output_format;
}

PromptBundle render_prompt(std::span<const VgDetection> detections) {
  for (std::size_t i = 0; i < detections.size(); ++i) {
    try {
      detections[i].validate();
    } catch (const ValidationError& e) {
      throw ValidationError("detection " + std::to_string(i) + ": " + e.what());
    }
  }
  return {prompt_text::kTaskDescription, vg_detections_to_json(detections),
          std::string(prompt_text::kOutputInstruction) + "\n" + prompt_text::kOutputSample};
}

// ---------------------------------------------------------------------------
// VLM output

std::string_view to_string(RiskLevel level) {
  switch (level) {
    case RiskLevel::kHigh: return "high";
    case RiskLevel::kMedium: return "medium";
    case RiskLevel::kLow: return "low";
  }
  return "low";
}

bool level_matches_score(RiskLevel level, double s) {
  switch (level) {
    case RiskLevel::kHigh: return s >= 0.7;
    case RiskLevel::kLow: return s <= 0.3;
    case RiskLevel::kMedium: return s > 0.3 && s < 0.7;
  }
  return false;
}

CategoryTable::CategoryTable()
    : ids_{{"pedestrian", 0}, {"bus", 1},   {"bicycle", 2},
           {"car", 3},        {"motorcycle", 4}, {"truck", 5},
           {"fence", 6},      {"barrier", 7}, {"construction cone", 8}} {}

std::optional<int> CategoryTable::id_of(std::string_view name) const {
  auto it = ids_.find(name);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

void CategoryTable::set(std::string name, int id) { ids_[std::move(name)] = id; }

namespace {

std::optional<std::size_t> parse_rank_key(const std::string& key) {
  if (key.empty() || key.size() > 9) return std::nullopt;
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), v);
  if (ec != std::errc() || ptr != key.data() + key.size()) return std::nullopt;
  return v;
}

}  // namespace

ParsedAnnotations parse_vlm_output(std::string_view text, std::optional<ImageBounds> bounds,
                                   const CategoryTable& categories) {
  ParsedAnnotations result;
  std::vector<std::string> repairs;
  const ordered_json doc = parse_relaxed(text, &repairs);
  for (auto& r : repairs) result.warnings.push_back("repaired JSON: " + r);
  if (!doc.is_object()) throw ValidationError("VLM output must be a rank-keyed object");

  std::vector<std::pair<std::size_t, const ordered_json*>> ranked;
  std::vector<std::pair<std::size_t, std::string>> keys;
  std::vector<std::string> problems;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const auto rank = parse_rank_key(it.key());
    if (!rank) {
      problems.push_back("key '" + it.key() + "' is not a rank index");
      continue;
    }
    ranked.emplace_back(*rank, &it.value());
    keys.emplace_back(*rank, it.key());
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::sort(keys.begin(), keys.end());
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i].first != i) {
      problems.push_back("rank keys are not contiguous from 0 (found " +
                         std::to_string(ranked[i].first) + " at position " +
                         std::to_string(i) + ")");
      break;
    }
  }

  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const ordered_json& e = *ranked[i].second;
    const std::string tag = "entry '" + keys[i].second + "': ";
    RiskAnnotationEntry entry;
    entry.rank_key = keys[i].second;
    try {
      if (!e.is_object()) throw ValidationError("must be an object");
      for (const char* field :
           {"category_id", "bbox", "risk_score", "risk_level", "category_name", "reason"}) {
        if (!e.contains(field)) throw ValidationError(std::string("missing '") + field + "'");
      }
      const auto& cid = e.at("category_id");
      if (!cid.is_number_integer()) throw ValidationError("'category_id' must be an integer");
      entry.category_id = cid.get<int>();
      const auto& bb = e.at("bbox");
      if (!bb.is_array() || bb.size() != 4) throw ValidationError("'bbox' must have 4 numbers");
      for (std::size_t k = 0; k < 4; ++k) entry.bbox[k] = json_number(bb[k], "bbox");
      entry.risk_score = json_number(e.at("risk_score"), "risk_score");
      std::string level = json_string(e.at("risk_level"), "risk_level");
      std::transform(level.begin(), level.end(), level.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      if (level == "high") {
        entry.risk_level = RiskLevel::kHigh;
      } else if (level == "medium") {
        entry.risk_level = RiskLevel::kMedium;
      } else if (level == "mediam") {
        entry.risk_level = RiskLevel::kMedium;
        result.warnings.push_back(tag + "risk_level 'mediam' normalized to 'medium'");
      } else if (level == "low") {
        entry.risk_level = RiskLevel::kLow;
      } else {
        throw ValidationError("unknown risk_level '" + level + "'");
      }
      entry.category_name = json_string(e.at("category_name"), "category_name");
      entry.reason = json_string(e.at("reason"), "reason");

      std::vector<std::string> issues;
      if (!(entry.risk_score >= 0.0 && entry.risk_score <= 1.0)) {
        issues.push_back("risk_score outside [0, 1]");
      } else if (!level_matches_score(entry.risk_level, entry.risk_score)) {
        std::ostringstream os;
        os << "risk_level '" << to_string(entry.risk_level)
           << "' inconsistent with risk_score " << entry.risk_score;
        issues.push_back(os.str());
      }
      const auto& b = entry.bbox;
      if (!(b[0] <= b[2] && b[1] <= b[3])) issues.push_back("bbox corners out of order");
      if (bounds && (b[0] < 0 || b[1] < 0 || b[2] > bounds->width || b[3] > bounds->height)) {
        issues.push_back("bbox outside the image");
      }
      for (auto& s : issues) problems.push_back(tag + s);
      if (auto id = categories.id_of(entry.category_name); id && *id != entry.category_id) {
        result.warnings.push_back(tag + "category_id " + std::to_string(entry.category_id) +
                                  " differs from the table id " + std::to_string(*id) +
                                  " for '" + entry.category_name + "'");
      }
    } catch (const ValidationError& err) {
      problems.push_back(tag + err.what());
    } catch (const nlohmann::json::exception& err) {
      problems.push_back(tag + err.what());
    }
    result.entries.push_back(std::move(entry));
  }

  if (!problems.empty()) {
    std::string msg = "invalid VLM output:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
  return result;
}

std::string serialize_annotations(std::span<const RiskAnnotationEntry> entries) {
  ordered_json doc = ordered_json::object();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    ordered_json bbox = ordered_json::array();
    for (double v : e.bbox) {
      if (v == std::floor(v) && std::abs(v) < 1e15) {
        bbox.push_back(static_cast<long long>(v));
      } else {
        bbox.push_back(v);
      }
    }
    doc[std::to_string(i)] = {{"category_id", e.category_id},
                              {"bbox", std::move(bbox)},
                              {"risk_score", e.risk_score},
                              {"risk_level", std::string(to_string(e.risk_level))},
                              {"category_name", e.category_name},
                              {"reason", e.reason}};
  }
  return doc.dump(2);
}

std::string RankWarning::message() const {
  std::ostringstream os;
  os << "rank " << first << " (score " << first_score << ") is ranked above rank "
     << second << " (score " << second_score << ")";
  return os.str();
}

std::vector<RankWarning> check_rank_score_consistency(
    std::span<const RiskAnnotationEntry> entries) {
  std::vector<RankWarning> out;
  for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
    if (entries[i].risk_score < entries[i + 1].risk_score) {
      out.push_back({i, i + 1, entries[i].risk_score, entries[i + 1].risk_score});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Semantic mask

MaskDrawing draw_semantic_mask(std::span<const RiskAnnotationEntry> entries,
                               std::size_t width, std::size_t height) {
  MaskDrawing out{GrayImage(width, height), {}};
  const double w = static_cast<double>(width), h = static_cast<double>(height);
  for (const auto& e : entries) {
    const auto& b = e.bbox;
    if (b[0] < 0 || b[1] < 0 || b[2] > w || b[3] > h) {
      out.warnings.push_back("bbox of entry '" + e.rank_key + "' clipped to the image");
    }
    const double x1 = std::clamp(std::floor(b[0]), 0.0, w);
    const double y1 = std::clamp(std::floor(b[1]), 0.0, h);
    const double x2 = std::clamp(std::ceil(b[2]), 0.0, w);
    const double y2 = std::clamp(std::ceil(b[3]), 0.0, h);
    const auto value = static_cast<std::uint8_t>(
        std::lround(255.0 * std::clamp(e.risk_score, 0.0, 1.0)));
    for (auto y = static_cast<std::size_t>(y1); y < static_cast<std::size_t>(y2); ++y) {
      for (auto x = static_cast<std::size_t>(x1); x < static_cast<std::size_t>(x2); ++x) {
        out.mask.at(x, y) = std::max(out.mask.at(x, y), value);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fixture replay

FixtureReplayClient::FixtureReplayClient(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_)) {
    throw NotFoundError("fixture directory " + dir_.string() + " does not exist");
  }
}

AnnotationRecord FixtureReplayClient::fetch(const std::string& frame_id) const {
  const auto vg = dir_ / (frame_id + ".vg.json");
  const auto vlm = dir_ / (frame_id + ".vlm.json");
  if (!std::filesystem::is_regular_file(vg) || !std::filesystem::is_regular_file(vlm)) {
    throw NotFoundError("no recorded responses for frame '" + frame_id + "'");
  }
  return {read_file(vg), read_file(vlm)};
}

std::vector<std::string> FixtureReplayClient::frame_ids() const {
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    const std::string name = entry.path().filename().string();
    static constexpr std::string_view kSuffix = ".vlm.json";
    if (name.size() > kSuffix.size() &&
        name.compare(name.size() - kSuffix.size(), kSuffix.size(), kSuffix) == 0) {
      ids.push_back(name.substr(0, name.size() - kSuffix.size()));
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace rsd
