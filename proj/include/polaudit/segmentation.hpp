#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "polaudit/csv.hpp"
#include "polaudit/errors.hpp"
#include "polaudit/ingest.hpp"
#include "polaudit/strings.hpp"

namespace polaudit {

enum class CategoryLabel { FPCU, TPD, OTHER };

inline const char* to_string(CategoryLabel label) {
  switch (label) {
    case CategoryLabel::FPCU: return "FPCU";
    case CategoryLabel::TPD: return "TPD";
    default: return "OTHER";
  }
}

inline CategoryLabel category_from_string(std::string_view s) {
  if (s == "FPCU") return CategoryLabel::FPCU;
  if (s == "TPD") return CategoryLabel::TPD;
  if (s == "OTHER") return CategoryLabel::OTHER;
  throw InputError("unknown category label '" + std::string(s) + "'");
}

struct Segment {
  std::string segment_id;  // "<policy_id>#<ordinal>"
  std::string policy_id;
  std::size_t ordinal = 0;
  std::string heading;  // empty when none
  std::string text;     // exact slice of the policy text at char_span
  std::size_t span_begin = 0;
  std::size_t span_end = 0;
};

struct SegmenterConfig {
  std::size_t min_segment_chars = 200;  // headingless merge-forward threshold
};

namespace detail {

inline bool is_heading_line(std::string_view line, std::size_t* hashes,
                            std::string* heading_text) {
  std::size_t h = 0;
  while (h < line.size() && line[h] == '#') ++h;
  if (h == 0 || h > 6 || h >= line.size() || line[h] != ' ') return false;
  if (hashes) *hashes = h;
  if (heading_text) *heading_text = trim(line.substr(h + 1));
  return true;
}

struct RawPiece {
  std::size_t begin = 0, end = 0;
  std::string heading;
};

}  // namespace detail

// Splits on '#'-prefixed heading lines produced by extract_main_text;
// headingless text falls back to blank-line paragraph groups with short
// pieces merged forward into their successor.
inline std::vector<Segment> segment_policy(const PolicyDocument& doc,
                                           const SegmenterConfig& cfg = {}) {
  const std::string& text = doc.text;
  if (text.empty()) throw InputError("segment_policy: empty document");

  std::vector<detail::RawPiece> pieces;

  // Locate heading-marker line starts.
  std::vector<std::pair<std::size_t, std::string>> headings;
  std::size_t line_start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '\n') {
      std::string_view line(text.data() + line_start, i - line_start);
      std::string htext;
      if (detail::is_heading_line(line, nullptr, &htext))
        headings.emplace_back(line_start, htext);
      line_start = i + 1;
    }
  }

  if (!headings.empty()) {
    if (headings.front().first > 0)
      pieces.push_back({0, headings.front().first, ""});
    for (std::size_t k = 0; k < headings.size(); ++k) {
      std::size_t begin = headings[k].first;
      std::size_t end = (k + 1 < headings.size()) ? headings[k + 1].first
                                                  : text.size();
      pieces.push_back({begin, end, headings[k].second});
    }
  } else {
    // Paragraph groups split at blank lines.
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t brk = pos;
      bool found = false;
      for (std::size_t i = pos; i + 1 < text.size(); ++i) {
        if (text[i] != '\n') continue;
        std::size_t j = i + 1;
        while (j < text.size() && (text[j] == ' ' || text[j] == '\t' || text[j] == '\r'))
          ++j;
        if (j < text.size() && text[j] == '\n') {
          brk = i;
          found = true;
          break;
        }
      }
      if (!found) {
        pieces.push_back({pos, text.size(), ""});
        break;
      }
      std::size_t next = brk;
      while (next < text.size() && is_space(text[next])) ++next;
      pieces.push_back({pos, next, ""});
      pos = next;
    }
    // Merge-forward pieces below the minimum length (the last short piece
    // joins its predecessor instead).
    std::vector<detail::RawPiece> merged;
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      detail::RawPiece piece = pieces[k];
      while (trim_view(std::string_view(text).substr(piece.begin,
                                                     piece.end - piece.begin))
                     .size() < cfg.min_segment_chars &&
             k + 1 < pieces.size()) {
        ++k;
        piece.end = pieces[k].end;
      }
      if (trim_view(std::string_view(text).substr(piece.begin,
                                                  piece.end - piece.begin))
                  .size() < cfg.min_segment_chars &&
          !merged.empty()) {
        merged.back().end = piece.end;
      } else {
        merged.push_back(piece);
      }
    }
    pieces = std::move(merged);
  }

  std::vector<Segment> segments;
  for (const auto& piece : pieces) {
    // Trim span to its non-whitespace extent.
    std::size_t b = piece.begin, e = piece.end;
    while (b < e && is_space(text[b])) ++b;
    while (e > b && is_space(text[e - 1])) --e;
    if (b == e) continue;
    Segment seg;
    seg.policy_id = doc.policy_id;
    seg.ordinal = segments.size();
    seg.segment_id = doc.policy_id + "#" + std::to_string(seg.ordinal);
    seg.heading = piece.heading;
    seg.span_begin = b;
    seg.span_end = e;
    seg.text = text.substr(b, e - b);
    segments.push_back(std::move(seg));
  }
  return segments;
}

// ---- OPP-115 style annotations ----------------------------------------------

struct LabeledSegment {
  std::string text;
  CategoryLabel label = CategoryLabel::OTHER;
};

struct AnnotationSet {
  std::vector<LabeledSegment> items;
  std::vector<std::string> warnings;
};

// Shipped mapping from original 10-way category names to the 3-way labels.
inline const std::map<std::string, CategoryLabel>& opp115_label_map() {
  static const std::map<std::string, CategoryLabel> m = {
      {"First Party Collection/Use", CategoryLabel::FPCU},
      {"Third Party Sharing/Collection", CategoryLabel::TPD},
      {"Third Party Disclosure", CategoryLabel::TPD},
      {"User Choice/Control", CategoryLabel::OTHER},
      {"User Access, Edit and Deletion", CategoryLabel::OTHER},
      {"Data Retention", CategoryLabel::OTHER},
      {"Data Security", CategoryLabel::OTHER},
      {"Policy Change", CategoryLabel::OTHER},
      {"Do Not Track", CategoryLabel::OTHER},
      {"International and Specific Audiences", CategoryLabel::OTHER},
      {"Other", CategoryLabel::OTHER}};
  return m;
}

// CSV rows of (segment text, original category name). Duplicate texts keep
// the first label; unknown category names are a parse error.
inline AnnotationSet load_annotations(std::istream& in) {
  CsvReader reader(in);
  AnnotationSet set;
  std::vector<std::string> row;
  if (!reader.next(row)) {
    set.warnings.push_back("annotation file is empty");
    return set;
  }
  bool has_header = row.size() >= 2 && trim(row[0]) == "text" &&
                    trim(row[1]) == "category";
  std::set<std::string> seen_texts;
  auto consume = [&](const std::vector<std::string>& r, std::size_t line) {
    if (r.size() == 1 && trim(r[0]).empty()) return;
    if (r.size() < 2) throw ParseError("annotation row needs text,category", line);
    std::string text = trim(r[0]);
    std::string category = trim(r[1]);
    auto it = opp115_label_map().find(category);
    if (it == opp115_label_map().end())
      throw ParseError("unknown category name '" + category + "'", line);
    if (text.empty()) return;
    if (!seen_texts.insert(collapse_whitespace(to_lower(text))).second) return;
    set.items.push_back({std::move(text), it->second});
  };
  if (!has_header) consume(row, reader.line());
  while (reader.next(row)) consume(row, reader.line());
  if (set.items.empty()) set.warnings.push_back("no annotations loaded");
  return set;
}

inline AnnotationSet load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open annotations " + path);
  return load_annotations(in);
}

// ---- segment JSONL -----------------------------------------------------------

inline nlohmann::json segment_to_json(const Segment& seg) {
  nlohmann::json j;
  j["segment_id"] = seg.segment_id;
  j["policy_id"] = seg.policy_id;
  j["ordinal"] = seg.ordinal;
  if (!seg.heading.empty()) j["heading"] = seg.heading;
  j["text"] = seg.text;
  j["span"] = {seg.span_begin, seg.span_end};
  return j;
}

inline Segment segment_from_json(const nlohmann::json& j) {
  Segment seg;
  seg.segment_id = j.at("segment_id").get<std::string>();
  seg.policy_id = j.at("policy_id").get<std::string>();
  seg.ordinal = j.at("ordinal").get<std::size_t>();
  if (j.contains("heading")) seg.heading = j.at("heading").get<std::string>();
  seg.text = j.at("text").get<std::string>();
  seg.span_begin = j.at("span").at(0).get<std::size_t>();
  seg.span_end = j.at("span").at(1).get<std::size_t>();
  return seg;
}

inline std::vector<Segment> load_segments_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open segments " + path);
  std::vector<Segment> segments;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_view(line).empty()) continue;
    try {
      segments.push_back(segment_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("segments JSONL: ") + e.what(), line_no);
    }
  }
  return segments;
}

}  // namespace polaudit
