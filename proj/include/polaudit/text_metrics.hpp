#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "polaudit/errors.hpp"
#include "polaudit/strings.hpp"

namespace polaudit {

struct TokenizerConfig {
  // Lowercased tokens that do not end a sentence when followed by '.'.
  std::set<std::string> abbreviations = {
      "dr",  "mr",  "mrs", "ms",  "prof", "st",  "etc", "vs",
      "inc", "ltd", "co",  "no",  "fig",  "e.g", "i.e", "al"};
};

struct TokenizedDoc {
  std::vector<std::string> sentences;
  std::vector<std::string> words;           // lowercased
  std::vector<int> syllable_counts;         // aligned with words
};

// Heuristic syllable count: vowel groups (aeiouy); a trailing group that is
// exactly a single final 'e' is dropped unless it is the only group; min 1.
inline int count_syllables(std::string_view word) {
  if (word.empty()) throw InputError("count_syllables: empty word");
  for (char c : word)
    if (!is_alpha(c)) throw InputError("count_syllables: non-alphabetic input");
  int groups = 0;
  bool in_group = false;
  std::size_t last_group_start = 0, last_group_len = 0;
  auto is_vowel = [](char c) {
    c = ascii_lower(c);
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
  };
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (is_vowel(word[i])) {
      if (!in_group) {
        ++groups;
        in_group = true;
        last_group_start = i;
        last_group_len = 1;
      } else {
        ++last_group_len;
      }
    } else {
      in_group = false;
    }
  }
  if (groups > 1 && last_group_len == 1 &&
      last_group_start == word.size() - 1 &&
      ascii_lower(word.back()) == 'e') {
    --groups;
  }
  return std::max(groups, 1);
}

namespace detail {

// Word tokens are maximal alphabetic/apostrophe runs with at least one
// letter; outer apostrophes stripped, result lowercased.
inline std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_alpha(text[i]) || text[i] == '\'') {
      std::size_t b = i;
      bool has_alpha = false;
      while (i < text.size() && (is_alpha(text[i]) || text[i] == '\'')) {
        if (is_alpha(text[i])) has_alpha = true;
        ++i;
      }
      if (has_alpha) {
        std::size_t e = i;
        while (b < e && text[b] == '\'') ++b;
        while (e > b && text[e - 1] == '\'') --e;
        words.push_back(to_lower(text.substr(b, e - b)));
      }
    } else {
      ++i;
    }
  }
  return words;
}

inline std::string token_before(std::string_view text, std::size_t punct_pos) {
  std::size_t e = punct_pos;
  std::size_t b = e;
  while (b > 0 && (is_alpha(text[b - 1]) || text[b - 1] == '.' )) --b;
  std::string tok = to_lower(text.substr(b, e - b));
  while (!tok.empty() && tok.back() == '.') tok.pop_back();
  return tok;
}

}  // namespace detail

// Sentences split on {. ! ?} followed by whitespace and a capital or digit,
// with an abbreviation exception list for '.'.
inline TokenizedDoc tokenize(std::string_view text,
                             const TokenizerConfig& rules = {}) {
  if (text.empty()) throw InputError("tokenize: empty text");
  TokenizedDoc doc;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (c == '.') {
      std::string prev = detail::token_before(text, i);
      if (rules.abbreviations.count(prev)) continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && is_space(text[j])) ++j;
    bool has_ws = j > i + 1;
    if (has_ws && j < text.size() &&
        ((text[j] >= 'A' && text[j] <= 'Z') || is_digit(text[j]))) {
      std::string sent = trim(text.substr(start, i + 1 - start));
      if (!sent.empty()) doc.sentences.push_back(std::move(sent));
      start = j;
      i = j - 1;
    }
  }
  std::string tail = trim(text.substr(start));
  if (!tail.empty()) doc.sentences.push_back(std::move(tail));

  doc.words = detail::word_tokens(text);
  doc.syllable_counts.reserve(doc.words.size());
  for (const auto& w : doc.words) {
    std::string letters;
    for (char ch : w)
      if (is_alpha(ch)) letters.push_back(ch);
    doc.syllable_counts.push_back(count_syllables(letters));
  }
  return doc;
}

inline double flesch_reading_ease(const TokenizedDoc& doc) {
  if (doc.sentences.empty() || doc.words.empty())
    throw InputError("flesch_reading_ease: need at least one sentence and word");
  double words = static_cast<double>(doc.words.size());
  double sents = static_cast<double>(doc.sentences.size());
  double sylls = 0;
  for (int s : doc.syllable_counts) sylls += s;
  return 206.835 - 1.015 * (words / sents) - 84.6 * (sylls / words);
}

struct KeywordReport {
  struct Row {
    std::string group;
    std::string keyword;
    std::size_t doc_count = 0;
    double percentage = 0.0;  // doc_count / corpus size
  };
  std::vector<Row> rows;
  std::size_t corpus_size = 0;
};

namespace detail {

inline bool contains_token_sequence(const std::vector<std::string>& words,
                                    const std::vector<std::string>& seq) {
  if (seq.empty() || seq.size() > words.size()) return false;
  for (std::size_t i = 0; i + seq.size() <= words.size(); ++i) {
    bool hit = true;
    for (std::size_t j = 0; j < seq.size(); ++j) {
      if (words[i + j] != seq[j]) {
        hit = false;
        break;
      }
    }
    if (hit) return true;
  }
  return false;
}

}  // namespace detail

// A document counts once per keyword when the keyword occurs as a contiguous
// token sequence ("log" does not match "login").
inline KeywordReport keyword_report(
    const std::vector<std::vector<std::string>>& corpus_words,
    const std::vector<std::pair<std::string, std::vector<std::string>>>&
        keyword_sets) {
  if (keyword_sets.empty()) throw InputError("keyword_report: no keyword sets");
  KeywordReport report;
  report.corpus_size = corpus_words.size();
  for (const auto& [group, keywords] : keyword_sets) {
    if (keywords.empty())
      throw InputError("keyword_report: empty keyword list '" + group + "'");
    for (const auto& kw : keywords) {
      auto seq = detail::word_tokens(kw);
      if (seq.empty())
        throw InputError("keyword_report: keyword '" + kw + "' has no tokens");
      KeywordReport::Row row;
      row.group = group;
      row.keyword = kw;
      for (const auto& words : corpus_words)
        if (detail::contains_token_sequence(words, seq)) ++row.doc_count;
      row.percentage = report.corpus_size == 0
                           ? 0.0
                           : static_cast<double>(row.doc_count) /
                                 static_cast<double>(report.corpus_size);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

struct MannWhitneyResult {
  double u = 0.0;        // U statistic of the first sample
  double p_value = 1.0;  // two-sided
  bool exact = false;
};

namespace detail {

inline std::vector<double> midranks(const std::vector<double>& pooled_sorted) {
  std::vector<double> ranks(pooled_sorted.size());
  std::size_t i = 0;
  while (i < pooled_sorted.size()) {
    std::size_t j = i;
    while (j + 1 < pooled_sorted.size() &&
           pooled_sorted[j + 1] == pooled_sorted[i])
      ++j;
    double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[k] = r;
    i = j + 1;
  }
  return ranks;
}

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace detail

// Exact p by enumerating all C(n+m, n) labelings when n+m <= exact_cutoff,
// otherwise a normal approximation with tie and continuity corrections.
inline MannWhitneyResult mann_whitney_u(const std::vector<double>& a,
                                        const std::vector<double>& b,
                                        std::size_t exact_cutoff = 12) {
  if (a.empty() || b.empty()) throw InputError("mann_whitney_u: empty sample");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(n);
  for (double v : a) pooled.emplace_back(v, 0);
  for (double v : b) pooled.emplace_back(v, 1);
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = pooled[i].first;
  std::vector<double> ranks = detail::midranks(values);

  double rank_sum_a = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (pooled[i].second == 0) rank_sum_a += ranks[i];
  double u = rank_sum_a - static_cast<double>(na) * (na + 1) / 2.0;
  const double mu = static_cast<double>(na) * static_cast<double>(nb) / 2.0;

  MannWhitneyResult res;
  res.u = u;
  if (n <= exact_cutoff) {
    res.exact = true;
    // Enumerate all position subsets of size na; count labelings at least as
    // extreme (|U - mu|) as observed.
    std::vector<std::size_t> idx(na);
    for (std::size_t i = 0; i < na; ++i) idx[i] = i;
    std::size_t total = 0, extreme = 0;
    const double obs_dev = std::abs(u - mu);
    while (true) {
      double rs = 0;
      for (std::size_t i : idx) rs += ranks[i];
      double uu = rs - static_cast<double>(na) * (na + 1) / 2.0;
      ++total;
      if (std::abs(uu - mu) >= obs_dev - 1e-12) ++extreme;
      // next combination
      std::size_t k = na;
      while (k > 0 && idx[k - 1] == n - na + (k - 1)) --k;
      if (k == 0) break;
      ++idx[k - 1];
      for (std::size_t i = k; i < na; ++i) idx[i] = idx[i - 1] + 1;
    }
    res.p_value = static_cast<double>(extreme) / static_cast<double>(total);
  } else {
    // Tie correction over tied groups.
    double tie_term = 0;
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && values[j + 1] == values[i]) ++j;
      double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
    double nn = static_cast<double>(n);
    double var = (static_cast<double>(na) * nb / 12.0) *
                 ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    if (var <= 0) {
      res.p_value = 1.0;
    } else {
      double z = (std::abs(u - mu) - 0.5) / std::sqrt(var);
      if (z < 0) z = 0;
      res.p_value = std::min(1.0, 2.0 * detail::normal_sf(z));
    }
  }
  return res;
}

// (mean(b) - mean(a)) / pooled sample standard deviation.
inline double cohens_d(const std::vector<double>& a,
                       const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw InputError("cohens_d: need at least two values per sample");
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto sample_var = [&](const std::vector<double>& v, double m) {
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
  };
  double ma = mean(a), mb = mean(b);
  double va = sample_var(a, ma), vb = sample_var(b, mb);
  double df_a = static_cast<double>(a.size() - 1);
  double df_b = static_cast<double>(b.size() - 1);
  double pooled = (df_a * va + df_b * vb) / (df_a + df_b);
  if (pooled <= 0)
    throw DegenerateInputError("cohens_d: zero pooled variance");
  return (mb - ma) / std::sqrt(pooled);
}

}  // namespace polaudit
