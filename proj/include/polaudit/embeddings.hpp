#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "polaudit/errors.hpp"
#include "polaudit/strings.hpp"

namespace polaudit {

// Immutable after load; safe to share across threads.
struct WordVectors {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::size_t> vocab;  // word -> row
  std::vector<double> matrix;                          // row-major |vocab| x dim

  std::size_t size() const { return vocab.size(); }

  const double* row(std::size_t index) const { return matrix.data() + index * dim; }

  std::optional<std::size_t> index_of(std::string_view word) const {
    auto it = vocab.find(std::string(word));
    if (it == vocab.end()) return std::nullopt;
    return it->second;
  }

  double euclidean(std::size_t i, std::size_t j) const {
    const double* a = row(i);
    const double* b = row(j);
    double s = 0;
    for (std::size_t k = 0; k < dim; ++k) {
      double d = a[k] - b[k];
      s += d * d;
    }
    return std::sqrt(s);
  }
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a == b) return 1.0;  // keeps identical inputs at exactly 1
  double num = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return num / (std::sqrt(na) * std::sqrt(nb));
}

inline void l2_normalize(double* v, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += v[i] * v[i];
  if (s <= 0) return;
  double inv = 1.0 / std::sqrt(s);
  for (std::size_t i = 0; i < n; ++i) v[i] *= inv;
}

inline double parse_double(std::string_view s, std::size_t line_no) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("bad number '" + std::string(s) + "'", line_no);
  return v;
}

}  // namespace detail

// Textual vector format: header "count dim", then one "word v1 .. vdim" row
// per line. Any fasttext/word2vec-style text file fits.
inline WordVectors load_word_vectors(const std::string& path,
                                     std::optional<std::size_t> expected_dim = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("load_word_vectors: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty vector file", 1);
  auto header = split_ws(line);
  if (header.size() != 2)
    throw ParseError("expected header 'count dim'", 1);
  std::size_t count = 0, dim = 0;
  try {
    count = std::stoull(header[0]);
    dim = std::stoull(header[1]);
  } catch (const std::exception&) {
    throw ParseError("bad header '" + line + "'", 1);
  }
  if (dim == 0) throw ParseError("dimension must be positive", 1);
  if (expected_dim && dim != *expected_dim)
    throw ParseError("dimension " + std::to_string(dim) + " != expected " +
                         std::to_string(*expected_dim),
                     1);
  WordVectors wv;
  wv.dim = dim;
  wv.matrix.reserve(count * dim);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_view(line).empty()) continue;
    auto fields = split_ws(line);
    if (fields.size() != dim + 1)
      throw ParseError("row has " + std::to_string(fields.size() - 1) +
                           " values, expected " + std::to_string(dim),
                       line_no);
    const std::string& word = fields[0];
    if (wv.vocab.count(word))
      throw ParseError("duplicate word '" + word + "'", line_no);
    wv.vocab.emplace(word, wv.vocab.size());
    for (std::size_t k = 1; k <= dim; ++k)
      wv.matrix.push_back(detail::parse_double(fields[k], line_no));
  }
  if (wv.vocab.size() != count)
    throw ParseError("header declared " + std::to_string(count) + " rows, found " +
                         std::to_string(wv.vocab.size()),
                     line_no);
  return wv;
}

// Round-trips the numeric content of load_word_vectors (17 significant digits).
inline void save_word_vectors(const WordVectors& wv, std::ostream& out) {
  std::vector<const std::string*> by_index(wv.size());
  for (const auto& [w, i] : wv.vocab) by_index[i] = &w;
  out << wv.size() << ' ' << wv.dim << '\n';
  char buf[64];
  for (std::size_t i = 0; i < wv.size(); ++i) {
    out << *by_index[i];
    for (std::size_t k = 0; k < wv.dim; ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", wv.row(i)[k]);
      out << ' ' << buf;
    }
    out << '\n';
  }
}

// Normalized bag-of-words over the embedding vocabulary.
struct DocDistribution {
  std::vector<std::size_t> indices;  // strictly increasing vocab rows
  std::vector<double> weights;       // positive, sum to 1

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
};

struct NbowStats {
  std::size_t in_vocab_tokens = 0;
  std::size_t oov_tokens = 0;
  std::size_t stopword_tokens = 0;
};

inline const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = {
      "a",     "about", "above", "after",  "again",   "all",    "also",
      "am",    "an",    "and",   "any",    "are",     "as",     "at",
      "be",    "been",  "being", "below",  "between", "both",   "but",
      "by",    "can",   "could", "did",    "do",      "does",   "doing",
      "down",  "during", "each", "few",    "for",     "from",   "further",
      "had",   "has",   "have",  "having", "he",      "her",    "here",
      "hers",  "him",   "his",   "how",    "i",       "if",     "in",
      "into",  "is",    "it",    "its",    "itself",  "just",   "me",
      "more",  "most",  "my",    "no",     "nor",     "not",    "now",
      "of",    "off",   "on",    "once",   "only",    "or",     "other",
      "our",   "ours",  "out",   "over",   "own",     "s",      "same",
      "she",   "should", "so",   "some",   "such",    "t",      "than",
      "that",  "the",   "their", "theirs", "them",    "then",   "there",
      "these", "they",  "this",  "those",  "through", "to",     "too",
      "under", "until", "up",    "very",   "was",     "we",     "were",
      "what",  "when",  "where", "which",  "while",   "who",    "whom",
      "why",   "will",  "with",  "you",    "your",    "yours",  "yourself"};
  return words;
}

// Counts in-vocabulary, non-stopword tokens and normalizes to sum 1.
// OOV tokens are dropped and tallied, never randomized.
inline DocDistribution doc_to_nbow(const std::vector<std::string>& words,
                                   const WordVectors& vectors,
                                   const std::set<std::string>& stopwords,
                                   NbowStats* stats = nullptr) {
  std::map<std::size_t, double> counts;
  NbowStats local;
  for (const auto& w : words) {
    if (stopwords.count(w)) {
      ++local.stopword_tokens;
      continue;
    }
    auto idx = vectors.index_of(w);
    if (!idx) {
      ++local.oov_tokens;
      continue;
    }
    ++local.in_vocab_tokens;
    counts[*idx] += 1.0;
  }
  if (stats) *stats = local;
  if (counts.empty())
    throw EmptyDistributionError("doc_to_nbow: no in-vocabulary tokens survive");
  DocDistribution dist;
  dist.indices.reserve(counts.size());
  dist.weights.reserve(counts.size());
  double total = static_cast<double>(local.in_vocab_tokens);
  for (const auto& [idx, c] : counts) {
    dist.indices.push_back(idx);
    dist.weights.push_back(c / total);
  }
  return dist;
}

inline DocDistribution doc_to_nbow(const std::vector<std::string>& words,
                                   const WordVectors& vectors,
                                   NbowStats* stats = nullptr) {
  return doc_to_nbow(words, vectors, default_stopwords(), stats);
}

namespace detail {

// Mean of the in-vocabulary token vectors (token multiplicity counts).
inline std::vector<double> mean_embedding(const std::vector<std::string>& words,
                                          const WordVectors& vectors,
                                          std::size_t* in_vocab = nullptr) {
  std::vector<double> mean(vectors.dim, 0.0);
  std::size_t hits = 0;
  for (const auto& w : words) {
    auto idx = vectors.index_of(w);
    if (!idx) continue;
    const double* row = vectors.row(*idx);
    for (std::size_t k = 0; k < vectors.dim; ++k) mean[k] += row[k];
    ++hits;
  }
  if (hits > 0)
    for (auto& v : mean) v /= static_cast<double>(hits);
  if (in_vocab) *in_vocab = hits;
  return mean;
}

}  // namespace detail

}  // namespace polaudit
