#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "polaudit/embeddings.hpp"
#include "polaudit/errors.hpp"
#include "polaudit/strings.hpp"
#include "polaudit/text_metrics.hpp"
#include "polaudit/transport.hpp"

namespace polaudit {

// ---- token stream with character spans --------------------------------------

struct SpannedToken {
  std::string text;  // lowercase
  std::size_t begin = 0, end = 0;
};

// Alphanumeric/apostrophe runs; "Covid-19" yields "covid" and "19".
inline std::vector<SpannedToken> span_tokens(std::string_view text) {
  std::vector<SpannedToken> tokens;
  std::size_t i = 0;
  auto is_tok = [](char c) { return is_alpha(c) || is_digit(c) || c == '\''; };
  while (i < text.size()) {
    if (!is_tok(text[i])) {
      ++i;
      continue;
    }
    std::size_t b = i;
    while (i < text.size() && is_tok(text[i])) ++i;
    std::size_t e = i;
    while (b < e && text[b] == '\'') ++b;
    while (e > b && text[e - 1] == '\'') --e;
    if (b < e) tokens.push_back({to_lower(text.substr(b, e - b)), b, e});
  }
  return tokens;
}

// ---- pattern language --------------------------------------------------------
//
// A pattern is a space-separated sequence of matchers:
//   literal         one token, exact
//   a|b|c           one token, any alternative
//   *               any single token
//   *?              a gap of 0..2 tokens
//   **              a gap of 0..8 tokens
// Matching is case-insensitive on whole tokens.

struct PatternElement {
  enum class Kind { literal, any_one, gap_short, gap_long };
  Kind kind = Kind::literal;
  std::vector<std::string> alternatives;  // for literal
};

struct CompiledPattern {
  std::string source;
  std::vector<PatternElement> elements;
};

inline CompiledPattern compile_pattern(const std::string& pattern) {
  CompiledPattern cp;
  cp.source = pattern;
  for (const auto& raw : split_ws(pattern)) {
    PatternElement el;
    if (raw == "*") {
      el.kind = PatternElement::Kind::any_one;
    } else if (raw == "*?") {
      el.kind = PatternElement::Kind::gap_short;
    } else if (raw == "**") {
      el.kind = PatternElement::Kind::gap_long;
    } else {
      el.kind = PatternElement::Kind::literal;
      for (const auto& alt : split(raw, '|')) {
        std::string lowered = to_lower(alt);
        if (lowered.empty())
          throw InputError("pattern '" + pattern + "' has an empty alternative");
        el.alternatives.push_back(lowered);
      }
    }
    cp.elements.push_back(std::move(el));
  }
  if (cp.elements.empty())
    throw InputError("pattern must contain at least one element");
  return cp;
}

namespace detail {

inline std::size_t gap_limit(PatternElement::Kind kind) {
  return kind == PatternElement::Kind::gap_short ? 2 : 8;
}

// Matches elements[ei..] against tokens[ti..]; when anchored, the full token
// range must be consumed. Returns the index one past the last consumed token.
inline std::optional<std::size_t> match_from(
    const std::vector<PatternElement>& elements, std::size_t ei,
    const std::vector<SpannedToken>& tokens, std::size_t ti, bool anchored) {
  if (ei == elements.size()) {
    if (anchored && ti != tokens.size()) return std::nullopt;
    return ti;
  }
  const auto& el = elements[ei];
  switch (el.kind) {
    case PatternElement::Kind::literal: {
      if (ti >= tokens.size()) return std::nullopt;
      for (const auto& alt : el.alternatives)
        if (tokens[ti].text == alt)
          return match_from(elements, ei + 1, tokens, ti + 1, anchored);
      return std::nullopt;
    }
    case PatternElement::Kind::any_one:
      if (ti >= tokens.size()) return std::nullopt;
      return match_from(elements, ei + 1, tokens, ti + 1, anchored);
    case PatternElement::Kind::gap_short:
    case PatternElement::Kind::gap_long: {
      std::size_t limit = gap_limit(el.kind);
      for (std::size_t g = 0; g <= limit && ti + g <= tokens.size(); ++g) {
        auto res = match_from(elements, ei + 1, tokens, ti + g, anchored);
        if (res) return res;
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace detail

struct PatternMatch {
  std::size_t begin = 0, end = 0;  // char span over matched tokens
  std::string pattern;
};

// First match in token order, or nullopt.
inline std::optional<PatternMatch> find_pattern(
    const CompiledPattern& pattern, const std::vector<SpannedToken>& tokens) {
  for (std::size_t start = 0; start < tokens.size(); ++start) {
    auto end = detail::match_from(pattern.elements, 0, tokens, start, false);
    if (end && *end > start) {
      return PatternMatch{tokens[start].begin, tokens[*end - 1].end,
                          pattern.source};
    }
  }
  return std::nullopt;
}

// True when the pattern matches the whole text (used to re-verify evidence).
inline bool pattern_matches_exactly(const std::string& pattern,
                                    std::string_view text) {
  auto cp = compile_pattern(pattern);
  auto tokens = span_tokens(text);
  if (tokens.empty()) return false;
  return detail::match_from(cp.elements, 0, tokens, 0, true).has_value();
}

// ---- lexicons ----------------------------------------------------------------

inline const std::vector<std::string>& ci_parameter_names() {
  static const std::vector<std::string> names = {
      "subject", "sender", "attribute", "recipient", "transmission_principle"};
  return names;
}

struct CiLexicons {
  int version = 1;
  std::map<std::string, std::vector<std::string>> patterns;  // per parameter

  void validate() const {
    for (const auto& name : ci_parameter_names()) {
      auto it = patterns.find(name);
      if (it == patterns.end() || it->second.empty())
        throw InputError("CI lexicon: parameter '" + name +
                         "' needs at least one pattern");
      for (const auto& p : it->second) compile_pattern(p);
    }
  }
};

struct VaguenessLexicon {
  int version = 1;
  // C = conditionality, G = generalization, M = modality, N = numeric
  std::map<std::string, std::vector<std::string>> cues;

  void validate() const {
    for (const char* cat : {"C", "G", "M", "N"}) {
      auto it = cues.find(cat);
      if (it == cues.end() || it->second.empty())
        throw InputError(std::string("vagueness lexicon: category '") + cat +
                         "' needs at least one cue");
      for (const auto& p : it->second) compile_pattern(p);
    }
  }
};

// Shipped detector v1. These are deterministic screening cues whose output is
// a candidate list for human review, not a legal judgment.
inline CiLexicons default_ci_lexicons() {
  CiLexicons lex;
  lex.version = 1;
  lex.patterns["subject"] = {
      "you", "your", "yours", "user|users", "patient|patients",
      "individual|individuals", "customer|customers", "data subject|subjects"};
  lex.patterns["sender"] = {
      "we", "us", "our|ours",
      "you provide|provided|supply|supplied|give|gave|submit|submitted",
      "from you", "by you",
      "the|this trust|hospital|organisation|organization|institute|institution|clinic|company|site|website",
      "information|data|records|details ** used|shared|disclosed|collected|transferred|processed|held|stored"};
  lex.patterns["attribute"] = {
      "personal information|data",
      "personally identifiable|identification information",
      "personal identification|identifiable information",
      "medical records|history|information",
      "health information|records|data",
      "patient information|data|records",
      "phi", "pii", "spi",
      "protected|personal health information",
      "sensitive personal data|information",
      "your|the information|data|records|details",
      "any information|data",
      "contact|demographic|financial|billing|insurance|genetic|biometric information|data|details",
      "cookie|cookies", "ip address|addresses",
      "name|address|email|telephone|phone"};
  lex.patterns["recipient"] = {
      "to|with us",
      "we ** collect|collects|collecting|receive|receives|obtain|obtains|gather|gathers",
      "to|with|among *? insurers|insurer|doctors|physicians|nurses|technicians|hospitals|providers|provider|partners|affiliates|contractors|vendors|processors|authorities|agencies|agency|police|government|regulators|courts|court|companies|company|organizations|organisations|entities|parties|party|researchers|staff|employees|officials|bodies|trusts|department|ministry"};
  lex.patterns["transmission_principle"] = {
      "to process|provide|improve|deliver|comply|protect|verify|facilitate|send|contact|fulfil|fulfill|obtain|market|administer|support|respond|prevent|ensure|enforce|manage|complete|offer|perform|conduct|communicate|treat|bill|pay|research|analyze|analyse|personalize|personalise|customize|customise",
      "for ** purposes", "for the purpose|purposes", "in order to",
      "if", "unless", "during", "subject to", "in accordance with",
      "where|when|as required|permitted|necessary|needed|described",
      "with|without your consent|authorization|authorisation|permission",
      "required|permitted by law",
      "contractual obligations",
      "legal basis|requirement|obligation"};
  lex.validate();
  return lex;
}

inline VaguenessLexicon default_vagueness_lexicon() {
  VaguenessLexicon lex;
  lex.version = 1;
  lex.cues["M"] = {"may", "might", "can", "could", "possibly"};
  lex.cues["C"] = {"depending", "as necessary", "as needed", "otherwise"};
  lex.cues["G"] = {"generally", "typically", "normally", "largely"};
  lex.cues["N"] = {"certain", "some", "most", "few"};
  lex.validate();
  return lex;
}

// ---- flags -------------------------------------------------------------------

enum class FlagKind {
  missing_recipient,
  missing_sender,
  missing_attribute,
  missing_transmission_principle,
  vague_C,
  vague_G,
  vague_M,
  vague_N
};

inline const char* to_string(FlagKind kind) {
  switch (kind) {
    case FlagKind::missing_recipient: return "missing_recipient";
    case FlagKind::missing_sender: return "missing_sender";
    case FlagKind::missing_attribute: return "missing_attribute";
    case FlagKind::missing_transmission_principle:
      return "missing_transmission_principle";
    case FlagKind::vague_C: return "vague_C";
    case FlagKind::vague_G: return "vague_G";
    case FlagKind::vague_M: return "vague_M";
    default: return "vague_N";
  }
}

inline FlagKind flag_kind_from_string(std::string_view s) {
  for (FlagKind kind :
       {FlagKind::missing_recipient, FlagKind::missing_sender,
        FlagKind::missing_attribute, FlagKind::missing_transmission_principle,
        FlagKind::vague_C, FlagKind::vague_G, FlagKind::vague_M,
        FlagKind::vague_N}) {
    if (s == to_string(kind)) return kind;
  }
  throw InputError("unknown flag kind '" + std::string(s) + "'");
}

struct Evidence {
  std::size_t begin = 0, end = 0;
  std::string pattern;
};

struct PracticeFlag {
  std::string segment_id;
  FlagKind kind = FlagKind::missing_recipient;
  std::vector<Evidence> evidence;  // empty exactly for missing_* flags
  int detector_version = 1;
};

struct CiPresence {
  bool present = false;
  std::vector<Evidence> evidence;
};

// One presence entry per CI parameter; a parameter is present iff at least
// one of its patterns matches (first match per pattern kept as evidence).
inline std::map<std::string, CiPresence> detect_ci_params(
    std::string_view segment_text, const CiLexicons& lexicons) {
  lexicons.validate();
  auto tokens = span_tokens(segment_text);
  std::map<std::string, CiPresence> result;
  for (const auto& name : ci_parameter_names()) {
    CiPresence presence;
    for (const auto& pattern : lexicons.patterns.at(name)) {
      auto cp = compile_pattern(pattern);
      if (auto m = find_pattern(cp, tokens)) {
        presence.present = true;
        presence.evidence.push_back({m->begin, m->end, m->pattern});
      }
    }
    result[name] = std::move(presence);
  }
  return result;
}

// One missing_* flag per absent parameter among sender, recipient, attribute
// and transmission principle. Subject is reported by detect_ci_params but
// never flagged, mirroring the four incompleteness kinds.
inline std::vector<PracticeFlag> flag_incompleteness(
    const std::string& segment_id, std::string_view segment_text,
    const CiLexicons& lexicons) {
  auto presence = detect_ci_params(segment_text, lexicons);
  std::vector<PracticeFlag> flags;
  const std::vector<std::pair<std::string, FlagKind>> kinds = {
      {"sender", FlagKind::missing_sender},
      {"recipient", FlagKind::missing_recipient},
      {"attribute", FlagKind::missing_attribute},
      {"transmission_principle", FlagKind::missing_transmission_principle}};
  for (const auto& [param, kind] : kinds) {
    if (!presence.at(param).present) {
      PracticeFlag flag;
      flag.segment_id = segment_id;
      flag.kind = kind;
      flag.detector_version = lexicons.version;
      flags.push_back(std::move(flag));
    }
  }
  return flags;
}

// A category fires when at least one of its cues matches as whole tokens;
// several categories may fire on one segment.
inline std::vector<PracticeFlag> flag_vagueness(const std::string& segment_id,
                                                std::string_view segment_text,
                                                const VaguenessLexicon& lexicon) {
  lexicon.validate();
  auto tokens = span_tokens(segment_text);
  std::vector<PracticeFlag> flags;
  const std::vector<std::pair<std::string, FlagKind>> kinds = {
      {"C", FlagKind::vague_C},
      {"G", FlagKind::vague_G},
      {"M", FlagKind::vague_M},
      {"N", FlagKind::vague_N}};
  for (const auto& [cat, kind] : kinds) {
    std::vector<Evidence> evidence;
    for (const auto& cue : lexicon.cues.at(cat)) {
      auto cp = compile_pattern(cue);
      if (auto m = find_pattern(cp, tokens))
        evidence.push_back({m->begin, m->end, m->pattern});
    }
    if (!evidence.empty()) {
      PracticeFlag flag;
      flag.segment_id = segment_id;
      flag.kind = kind;
      flag.evidence = std::move(evidence);
      flag.detector_version = lexicon.version;
      flags.push_back(std::move(flag));
    }
  }
  return flags;
}

// ---- law alignment -------------------------------------------------------------

struct LawClause {
  std::string clause_id;
  std::string text;
  std::string jurisdiction;
};

struct AlignmentReport {
  struct PracticeRow {
    std::string id;
    double min_wmd = 0.0;
    std::string nearest_clause;
  };
  std::vector<PracticeRow> per_practice;
  double min = 0.0, median = 0.0, max = 0.0;
  std::size_t skipped_practices = 0;  // unfeaturizable, tallied
  std::size_t skipped_clauses = 0;
};

// For each practice, the minimum WMD over the clause corpus; aggregates are
// min / median / max across practices (median = lower middle for even counts).
inline AlignmentReport law_alignment_wmd(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& practices,
    const std::vector<LawClause>& clauses, const WordVectors& vectors,
    const std::set<std::string>& stopwords = default_stopwords(),
    const TransportConfig& transport = {}) {
  if (practices.empty() || clauses.empty())
    throw InputError("law_alignment_wmd: need at least one practice and clause");
  AlignmentReport report;
  std::vector<std::pair<std::string, DocDistribution>> clause_dists;
  for (const auto& clause : clauses) {
    try {
      auto words = detail::word_tokens(clause.text);
      clause_dists.emplace_back(clause.clause_id,
                                doc_to_nbow(words, vectors, stopwords));
    } catch (const EmptyDistributionError&) {
      ++report.skipped_clauses;
    }
  }
  if (clause_dists.empty())
    throw InputError("law_alignment_wmd: no clause is featurizable");
  std::vector<double> mins;
  for (const auto& [id, words] : practices) {
    DocDistribution dist;
    try {
      dist = doc_to_nbow(words, vectors, stopwords);
    } catch (const EmptyDistributionError&) {
      ++report.skipped_practices;
      continue;
    }
    AlignmentReport::PracticeRow row;
    row.id = id;
    row.min_wmd = std::numeric_limits<double>::infinity();
    for (const auto& [clause_id, clause_dist] : clause_dists) {
      double d = wmd(dist, clause_dist, vectors, transport);
      if (d < row.min_wmd) {
        row.min_wmd = d;
        row.nearest_clause = clause_id;
      }
    }
    mins.push_back(row.min_wmd);
    report.per_practice.push_back(std::move(row));
  }
  if (mins.empty())
    throw InputError("law_alignment_wmd: no practice is featurizable");
  std::vector<double> sorted = mins;
  std::sort(sorted.begin(), sorted.end());
  report.min = sorted.front();
  report.max = sorted.back();
  report.median = sorted[(sorted.size() - 1) / 2];
  return report;
}

// ---- serialization ---------------------------------------------------------------

inline nlohmann::json ci_lexicons_to_json(const CiLexicons& lex) {
  nlohmann::json j;
  j["version"] = lex.version;
  for (const auto& [param, patterns] : lex.patterns) j[param] = patterns;
  return j;
}

inline CiLexicons ci_lexicons_from_json(const nlohmann::json& j) {
  CiLexicons lex;
  lex.version = j.at("version").get<int>();
  for (const auto& name : ci_parameter_names())
    lex.patterns[name] = j.at(name).get<std::vector<std::string>>();
  lex.validate();
  return lex;
}

inline nlohmann::json vagueness_lexicon_to_json(const VaguenessLexicon& lex) {
  nlohmann::json j;
  j["version"] = lex.version;
  for (const auto& [cat, cues] : lex.cues) j[cat] = cues;
  return j;
}

inline VaguenessLexicon vagueness_lexicon_from_json(const nlohmann::json& j) {
  VaguenessLexicon lex;
  lex.version = j.at("version").get<int>();
  for (const char* cat : {"C", "G", "M", "N"})
    lex.cues[cat] = j.at(cat).get<std::vector<std::string>>();
  lex.validate();
  return lex;
}

inline CiLexicons load_ci_lexicons(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open CI lexicon " + path);
  try {
    return ci_lexicons_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("CI lexicon " + path + ": " + e.what(), 0);
  }
}

inline VaguenessLexicon load_vagueness_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open vagueness lexicon " + path);
  try {
    return vagueness_lexicon_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("vagueness lexicon " + path + ": " + e.what(), 0);
  }
}

inline nlohmann::json flag_to_json(const PracticeFlag& flag) {
  nlohmann::json j;
  j["segment_id"] = flag.segment_id;
  j["flag_kind"] = to_string(flag.kind);
  nlohmann::json ev = nlohmann::json::array();
  for (const auto& e : flag.evidence)
    ev.push_back({{"span", {e.begin, e.end}}, {"pattern", e.pattern}});
  j["evidence"] = ev;
  j["detector_version"] = flag.detector_version;
  return j;
}

inline PracticeFlag flag_from_json(const nlohmann::json& j) {
  PracticeFlag flag;
  flag.segment_id = j.at("segment_id").get<std::string>();
  flag.kind = flag_kind_from_string(j.at("flag_kind").get<std::string>());
  for (const auto& e : j.at("evidence")) {
    Evidence ev;
    ev.begin = e.at("span").at(0).get<std::size_t>();
    ev.end = e.at("span").at(1).get<std::size_t>();
    ev.pattern = e.at("pattern").get<std::string>();
    flag.evidence.push_back(std::move(ev));
  }
  flag.detector_version = j.at("detector_version").get<int>();
  return flag;
}

inline std::vector<LawClause> load_law_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open law corpus " + path);
  std::vector<LawClause> clauses;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_view(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("law JSONL: ") + e.what(), line_no);
    }
    LawClause clause;
    clause.clause_id = j.at("clause_id").get<std::string>();
    clause.text = j.at("text").get<std::string>();
    clause.jurisdiction = j.value("jurisdiction", "");
    if (clause.text.empty())
      throw ParseError("law clause '" + clause.clause_id + "' has empty text",
                       line_no);
    if (!ids.insert(clause.clause_id).second)
      throw ParseError("duplicate clause_id '" + clause.clause_id + "'", line_no);
    clauses.push_back(std::move(clause));
  }
  return clauses;
}

}  // namespace polaudit
