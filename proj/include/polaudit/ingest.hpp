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

#include "polaudit/csv.hpp"
#include "polaudit/errors.hpp"
#include "polaudit/html.hpp"
#include "polaudit/sha256.hpp"
#include "polaudit/strings.hpp"
#include "polaudit/text_metrics.hpp"
#include "polaudit/url.hpp"

namespace polaudit {

class EmptyDocumentError : public InputError {
public:
  using InputError::InputError;
};

struct OrgRecord {
  std::string org_id;
  std::string name;
  std::string region;
  std::string country;  // ISO-3166 alpha-2
  std::optional<std::string> landing_url;
  std::optional<std::string> facility_type;
};

struct PolicyDocument {
  std::string policy_id;
  std::set<std::string> org_ids;
  std::string country;
  std::string source_url;
  std::string text;
  std::size_t word_count = 0;
  std::size_t sentence_count = 0;
  std::string content_hash;  // lowercase hex sha-256 of normalized text
};

// Normalization used for the dedup guarantee: lowercase, collapse whitespace.
inline std::string normalized_content_hash(std::string_view text) {
  return sha256_hex(collapse_whitespace(to_lower(text)));
}

// ---- org list CSV ---------------------------------------------------------

inline std::vector<OrgRecord> load_org_csv(
    std::istream& in, const std::set<std::string>& allowed_countries = {}) {
  CsvReader reader(in);
  std::vector<std::string> row;
  if (!reader.next(row)) throw ParseError("empty org CSV", 1);
  const std::vector<std::string> expected = {"org_id", "name",        "region",
                                             "country", "landing_url", "facility_type"};
  if (row.size() < expected.size())
    throw ParseError("org CSV header missing columns", 1);
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (trim(row[i]) != expected[i])
      throw ParseError("org CSV header: expected '" + expected[i] + "', got '" +
                           row[i] + "'",
                       1);
  std::vector<OrgRecord> orgs;
  std::set<std::string> seen;
  while (reader.next(row)) {
    if (row.size() == 1 && trim(row[0]).empty()) continue;
    if (row.size() < expected.size())
      throw ParseError("org CSV row has too few fields", reader.line());
    OrgRecord org;
    org.org_id = trim(row[0]);
    org.name = trim(row[1]);
    org.region = trim(row[2]);
    org.country = trim(row[3]);
    for (char& c : org.country)
      if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    if (org.org_id.empty()) throw ParseError("empty org_id", reader.line());
    if (!seen.insert(org.org_id).second)
      throw ParseError("duplicate org_id '" + org.org_id + "'", reader.line());
    if (!allowed_countries.empty() && !allowed_countries.count(org.country))
      throw ParseError("country '" + org.country + "' not in configured set",
                       reader.line());
    std::string url = trim(row[4]);
    if (!url.empty()) {
      auto parsed = try_parse_url(url);
      if (!parsed || !parsed->is_http())
        throw ParseError("landing_url '" + url + "' is not absolute http(s)",
                         reader.line());
      org.landing_url = parsed->str();
    }
    std::string facility = trim(row[5]);
    if (!facility.empty()) org.facility_type = facility;
    orgs.push_back(std::move(org));
  }
  return orgs;
}

// ---- link discovery -------------------------------------------------------

struct LinkKeywordConfig {
  std::vector<std::string> anchor_phrases = {"privacy policy", "privacy notice",
                                             "terms and conditions", "privacy"};
  std::vector<std::string> path_tokens = {"privacy"};
};

struct LinkDiagnostics {
  std::size_t anchors_seen = 0;
  std::size_t unresolvable_hrefs = 0;
};

// Anchors whose normalized text contains a configured phrase, or whose URL
// path contains a configured token. Relative hrefs resolve against the base;
// result keeps document order with duplicates removed.
inline std::vector<std::string> discover_policy_links(
    std::string_view page_html, const std::string& base_url,
    const LinkKeywordConfig& keywords = {}, LinkDiagnostics* diag = nullptr) {
  Url base = parse_url(base_url);
  if (!base.is_http()) throw InputError("base URL must be http(s)");
  std::vector<std::string> out;
  std::set<std::string> seen;
  LinkDiagnostics local;

  html::Tokenizer tok(page_html);
  std::optional<std::string> current_href;
  std::string anchor_text;
  int anchor_depth = 0;
  auto flush_anchor = [&]() {
    if (!current_href) return;
    ++local.anchors_seen;
    auto resolved = resolve_href(base, *current_href);
    if (!resolved) {
      ++local.unresolvable_hrefs;
    } else {
      std::string text = to_lower(collapse_whitespace(anchor_text));
      bool hit = false;
      for (const auto& phrase : keywords.anchor_phrases) {
        if (text.find(to_lower(collapse_whitespace(phrase))) != std::string::npos) {
          hit = true;
          break;
        }
      }
      if (!hit) {
        std::string path = to_lower(resolved->path);
        for (const auto& token : keywords.path_tokens) {
          if (path.find(to_lower(token)) != std::string::npos) {
            hit = true;
            break;
          }
        }
      }
      if (hit) {
        std::string url = resolved->str();
        if (seen.insert(url).second) out.push_back(url);
      }
    }
    current_href.reset();
    anchor_text.clear();
    anchor_depth = 0;
  };

  while (auto ev = tok.next()) {
    switch (ev->kind) {
      case html::Event::Kind::open:
        if (ev->name == "a") {
          flush_anchor();  // tolerate unclosed anchors
          for (const auto& attr : ev->attrs) {
            if (attr.name == "href") {
              current_href = attr.value;
              break;
            }
          }
          if (current_href) anchor_depth = 1;
        }
        break;
      case html::Event::Kind::close:
        if (ev->name == "a" && anchor_depth > 0) flush_anchor();
        break;
      case html::Event::Kind::text:
        if (anchor_depth > 0) anchor_text += ev->text + " ";
        break;
    }
  }
  flush_anchor();
  if (diag) *diag = local;
  return out;
}

// ---- main text extraction -------------------------------------------------

struct ExtractionConfig {
  std::set<std::string> skip_tags = {"script", "style",  "noscript", "nav",
                                     "header", "footer", "aside",    "form",
                                     "head",   "iframe", "svg",      "template",
                                     "button", "select", "option"};
  std::set<std::string> block_tags = {
      "p",  "div",  "section", "article", "li",    "ul",   "ol",
      "table", "tr", "blockquote", "pre", "main", "figure", "dl", "dt", "dd"};
  // Paragraphs dominated by link text are treated as navigation chrome.
  double max_link_density = 0.66;
  std::size_t min_links_for_density = 2;
};

// Plain text with headings kept as '#'-prefixed lines usable by the
// segmenter. Deterministic: same bytes in, same text out.
inline std::string extract_main_text(std::string_view html_bytes,
                                     const ExtractionConfig& cfg = {},
                                     std::optional<std::string> declared_charset = {}) {
  std::string decoded = html::decode_to_utf8(html_bytes, declared_charset);

  struct Paragraph {
    std::string text;
    int heading_level = 0;  // 0 = body paragraph
    std::size_t link_chars = 0;
    std::size_t links = 0;
  };
  std::vector<Paragraph> paras;
  Paragraph current;
  int skip_depth = 0;
  int anchor_depth = 0;
  int heading_level = 0;

  auto flush = [&]() {
    std::string collapsed = collapse_whitespace(current.text);
    if (!collapsed.empty()) {
      Paragraph p = current;
      p.text = std::move(collapsed);
      p.heading_level = heading_level;
      paras.push_back(std::move(p));
    }
    current = Paragraph{};
  };

  html::Tokenizer tok(decoded);
  while (auto ev = tok.next()) {
    switch (ev->kind) {
      case html::Event::Kind::open: {
        const std::string& name = ev->name;
        if (cfg.skip_tags.count(name)) {
          if (!ev->self_closing) ++skip_depth;
          break;
        }
        if (skip_depth > 0) break;
        if (name.size() == 2 && name[0] == 'h' && name[1] >= '1' && name[1] <= '6') {
          flush();
          heading_level = name[1] - '0';
        } else if (cfg.block_tags.count(name)) {
          flush();
          heading_level = 0;
        } else if (name == "br") {
          current.text += ' ';
        } else if (name == "a") {
          ++anchor_depth;
          ++current.links;
        }
        break;
      }
      case html::Event::Kind::close: {
        const std::string& name = ev->name;
        if (cfg.skip_tags.count(name)) {
          if (skip_depth > 0) --skip_depth;
          break;
        }
        if (skip_depth > 0) break;
        if (name.size() == 2 && name[0] == 'h' && name[1] >= '1' && name[1] <= '6') {
          flush();
          heading_level = 0;
        } else if (cfg.block_tags.count(name)) {
          flush();
          heading_level = 0;
        } else if (name == "a") {
          if (anchor_depth > 0) --anchor_depth;
        }
        break;
      }
      case html::Event::Kind::text:
        if (skip_depth == 0 && !ev->text.empty()) {
          current.text += ev->text;
          current.text += ' ';
          if (anchor_depth > 0) {
            std::string t = collapse_whitespace(ev->text);
            current.link_chars += t.size();
          }
        }
        break;
    }
  }
  flush();

  std::string out;
  int prev_heading = 0;
  for (const auto& p : paras) {
    if (p.heading_level == 0) {
      std::size_t total = p.text.size();
      if (total > 0 && p.links >= cfg.min_links_for_density &&
          static_cast<double>(p.link_chars) / static_cast<double>(total) >
              cfg.max_link_density)
        continue;
    }
    if (!out.empty()) out += prev_heading ? "\n" : "\n\n";
    if (p.heading_level > 0) {
      out += std::string(static_cast<std::size_t>(p.heading_level), '#');
      out += ' ';
    }
    out += p.text;
    prev_heading = p.heading_level;
  }
  if (out.empty())
    throw EmptyDocumentError("extract_main_text: no extractable text");
  return out;
}

// ---- India-style domain overlap filter -------------------------------------

struct DomainFilterConfig {
  // Generic words removed from org names before the overlap check.
  std::set<std::string> generic_words = {
      "hospital", "hospitals", "nursing",  "clinic",  "clinics", "medical",
      "centre",   "center",    "care",     "health",  "healthcare",
      "the",      "of",        "and",      "general", "home",    "homes",
      "institute", "trust",    "ltd",      "pvt",     "dr"};
  std::set<std::string> foreign_suffix_denylist;  // e.g. {"co.uk", "au"}
  std::size_t min_token_length = 4;
};

// True iff a non-generic org-name token of sufficient length appears inside
// the URL host, and the host does not carry a denylisted public suffix.
inline bool filter_by_domain_overlap(const std::string& url,
                                     const std::string& org_name,
                                     const DomainFilterConfig& cfg = {}) {
  Url parsed = parse_url(url);
  const std::string& host = parsed.host;
  for (const auto& suffix : cfg.foreign_suffix_denylist) {
    std::string sfx = to_lower(suffix);
    if (host == sfx) return false;
    if (host.size() > sfx.size() &&
        host.compare(host.size() - sfx.size(), sfx.size(), sfx) == 0 &&
        host[host.size() - sfx.size() - 1] == '.')
      return false;
  }
  for (const auto& token : detail::word_tokens(org_name)) {
    if (token.size() < cfg.min_token_length) continue;
    if (cfg.generic_words.count(token)) continue;
    if (host.find(token) != std::string::npos) return true;
  }
  return false;
}

// ---- dedup ------------------------------------------------------------------

// One document per distinct content hash; org_ids are merged, the earliest-
// ingested policy_id is kept, output ordered by policy_id.
inline std::vector<PolicyDocument> dedupe_policies(
    const std::vector<PolicyDocument>& docs) {
  std::map<std::string, PolicyDocument> by_hash;
  std::map<std::string, std::size_t> first_seen;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto& doc = docs[i];
    if (doc.content_hash.empty())
      throw InputError("dedupe_policies: document '" + doc.policy_id +
                       "' has no content_hash");
    auto it = by_hash.find(doc.content_hash);
    if (it == by_hash.end()) {
      by_hash.emplace(doc.content_hash, doc);
      first_seen.emplace(doc.content_hash, i);
    } else {
      it->second.org_ids.insert(doc.org_ids.begin(), doc.org_ids.end());
    }
  }
  std::vector<PolicyDocument> out;
  out.reserve(by_hash.size());
  for (auto& [hash, doc] : by_hash) out.push_back(std::move(doc));
  std::sort(out.begin(), out.end(),
            [](const PolicyDocument& a, const PolicyDocument& b) {
              return a.policy_id < b.policy_id;
            });
  return out;
}

// ---- corpus JSONL -----------------------------------------------------------

inline nlohmann::json policy_to_json(const PolicyDocument& doc) {
  nlohmann::json j;
  j["policy_id"] = doc.policy_id;
  j["org_ids"] = doc.org_ids;
  j["country"] = doc.country;
  j["source_url"] = doc.source_url;
  j["text"] = doc.text;
  j["word_count"] = doc.word_count;
  j["sentence_count"] = doc.sentence_count;
  j["content_hash"] = doc.content_hash;
  return j;
}

inline PolicyDocument policy_from_json(const nlohmann::json& j) {
  PolicyDocument doc;
  doc.policy_id = j.at("policy_id").get<std::string>();
  for (const auto& o : j.at("org_ids")) doc.org_ids.insert(o.get<std::string>());
  doc.country = j.at("country").get<std::string>();
  doc.source_url = j.at("source_url").get<std::string>();
  doc.text = j.at("text").get<std::string>();
  doc.word_count = j.at("word_count").get<std::size_t>();
  doc.sentence_count = j.at("sentence_count").get<std::size_t>();
  doc.content_hash = j.at("content_hash").get<std::string>();
  if (doc.text.empty()) throw ParseError("policy '" + doc.policy_id + "' has empty text", 0);
  return doc;
}

inline std::vector<PolicyDocument> load_corpus_jsonl(std::istream& in) {
  std::vector<PolicyDocument> docs;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> hashes;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_view(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("corpus JSONL: ") + e.what(), line_no);
    }
    auto doc = policy_from_json(j);
    if (!hashes.insert(doc.content_hash).second)
      throw ParseError("duplicate content_hash in corpus", line_no);
    docs.push_back(std::move(doc));
  }
  return docs;
}

inline std::vector<PolicyDocument> load_corpus_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus " + path);
  return load_corpus_jsonl(in);
}

// Append-only corpus writer: re-ingesting an already-present hash is a no-op.
class CorpusWriter {
public:
  explicit CorpusWriter(const std::string& path) : path_(path) {
    std::ifstream existing(path);
    if (existing) {
      for (const auto& doc : load_corpus_jsonl(existing))
        hashes_.insert(doc.content_hash);
    }
    out_.open(path, std::ios::app);
    if (!out_) throw InputError("cannot open corpus for append: " + path);
  }

  bool append(const PolicyDocument& doc) {
    if (!hashes_.insert(doc.content_hash).second) return false;
    out_ << policy_to_json(doc).dump() << '\n';
    out_.flush();
    return true;
  }

  std::size_t size() const { return hashes_.size(); }

private:
  std::string path_;
  std::ofstream out_;
  std::set<std::string> hashes_;
};

// Fills derived PolicyDocument fields from extracted text.
inline PolicyDocument make_policy_document(std::string policy_id,
                                           std::set<std::string> org_ids,
                                           std::string country,
                                           std::string source_url,
                                           std::string text) {
  if (text.empty()) throw InputError("policy text must be non-empty");
  PolicyDocument doc;
  doc.policy_id = std::move(policy_id);
  doc.org_ids = std::move(org_ids);
  doc.country = std::move(country);
  doc.source_url = std::move(source_url);
  auto tok = tokenize(text);
  doc.word_count = tok.words.size();
  doc.sentence_count = tok.sentences.size();
  doc.content_hash = normalized_content_hash(text);
  doc.text = std::move(text);
  return doc;
}

}  // namespace polaudit
