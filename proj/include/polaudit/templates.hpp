#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "polaudit/embeddings.hpp"
#include "polaudit/errors.hpp"
#include "polaudit/transport.hpp"

namespace polaudit {

struct SegmentGraph {
  std::vector<std::string> segment_ids;   // usable segments, input order
  std::vector<std::size_t> source_index;  // position in the input list
  std::vector<double> similarity;         // n x n cosine, diagonal 1
  std::vector<std::size_t> dropped;       // all-OOV inputs, tallied

  std::size_t size() const { return segment_ids.size(); }
  double sim(std::size_t i, std::size_t j) const { return similarity[i * size() + j]; }
  // PageRank edge weights: negative cosines clipped to zero, no self loops.
  double weight(std::size_t i, std::size_t j) const {
    return i == j ? 0.0 : std::max(0.0, sim(i, j));
  }
};

// Cosine between mean word embeddings for every segment pair. Segments whose
// tokens are all OOV are dropped and tallied.
inline SegmentGraph build_segment_graph(
    const std::vector<std::string>& segment_ids,
    const std::vector<std::vector<std::string>>& segment_words,
    const WordVectors& vectors) {
  if (segment_ids.size() != segment_words.size())
    throw InputError("build_segment_graph: ids/words size mismatch");
  SegmentGraph g;
  std::vector<std::vector<double>> means;
  for (std::size_t i = 0; i < segment_words.size(); ++i) {
    std::size_t hits = 0;
    auto mean = detail::mean_embedding(segment_words[i], vectors, &hits);
    if (hits == 0) {
      g.dropped.push_back(i);
      continue;
    }
    g.segment_ids.push_back(segment_ids[i]);
    g.source_index.push_back(i);
    means.push_back(std::move(mean));
  }
  const std::size_t n = g.segment_ids.size();
  if (n < 2)
    throw InputError("build_segment_graph: need at least two usable segments");
  g.similarity.assign(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double c = detail::cosine(means[i], means[j]);
      g.similarity[i * n + j] = c;
      g.similarity[j * n + i] = c;
    }
  return g;
}

struct PageRankConfig {
  double damping = 0.85;
  double tolerance = 1e-10;  // L1 change between iterations
  std::size_t max_iterations = 1000;
};

// Power iteration on the row-normalized clipped-cosine weights with uniform
// teleport; dangling rows redistribute uniformly. Scores sum to 1.
inline std::vector<double> pagerank(const SegmentGraph& g,
                                    const PageRankConfig& cfg = {}) {
  if (!(cfg.damping > 0 && cfg.damping < 1))
    throw InputError("pagerank: damping must lie in (0,1)");
  const std::size_t n = g.size();
  if (n == 0) throw InputError("pagerank: empty graph");
  std::vector<double> out_weight(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out_weight[i] += g.weight(i, j);
  std::vector<double> scores(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n);
  const double uniform = 1.0 / static_cast<double>(n);
  for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
    double dangling = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (out_weight[i] == 0.0) dangling += scores[i];
    double base = (1.0 - cfg.damping) * uniform +
                  cfg.damping * dangling * uniform;
    std::fill(next.begin(), next.end(), base);
    for (std::size_t i = 0; i < n; ++i) {
      if (out_weight[i] == 0.0) continue;
      double share = cfg.damping * scores[i] / out_weight[i];
      for (std::size_t j = 0; j < n; ++j) {
        double w = g.weight(i, j);
        if (w > 0) next[j] += share * w;
      }
    }
    double change = 0;
    for (std::size_t i = 0; i < n; ++i) change += std::abs(next[i] - scores[i]);
    scores.swap(next);
    if (change <= cfg.tolerance) {
      // Exact renormalization guards the sum-to-one contract.
      double total = 0;
      for (double s : scores) total += s;
      for (auto& s : scores) s /= total;
      return scores;
    }
  }
  double residual = 0;
  for (std::size_t i = 0; i < n; ++i) residual += std::abs(next[i] - scores[i]);
  throw ConvergenceError("pagerank did not converge", residual);
}

// Greedy MMR: first pick is the highest score; afterwards
// argmax lambda*score(s) - (1-lambda)*max_{t in selected} sim(s,t).
// Ties go to the lower ordinal. Returns indices into the graph.
inline std::vector<std::size_t> mmr_select(const std::vector<double>& scores,
                                           const SegmentGraph& g,
                                           std::size_t k, double lambda) {
  if (k < 1) throw InputError("mmr_select: k must be >= 1");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw InputError("mmr_select: lambda must lie in [0,1]");
  if (scores.size() != g.size())
    throw InputError("mmr_select: scores/graph size mismatch");
  const std::size_t n = g.size();
  std::vector<bool> taken(n, false);
  std::vector<std::size_t> selection;
  const std::size_t want = std::min(k, n);
  while (selection.size() < want) {
    std::size_t best = n;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < n; ++s) {
      if (taken[s]) continue;
      double value;
      if (selection.empty()) {
        value = scores[s];
      } else {
        double max_sim = -std::numeric_limits<double>::infinity();
        for (std::size_t t : selection) max_sim = std::max(max_sim, g.sim(s, t));
        value = lambda * scores[s] - (1.0 - lambda) * max_sim;
      }
      if (value > best_value) {
        best_value = value;
        best = s;
      }
    }
    taken[best] = true;
    selection.push_back(best);
  }
  return selection;
}

// Seeded uniform sample without replacement (deterministic across platforms).
inline std::vector<std::size_t> random_n_baseline(std::size_t n, std::size_t k,
                                                  std::uint32_t seed) {
  if (k < 1) throw InputError("random_n_baseline: k must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937 rng(seed);
  for (std::size_t i = 0; i < std::min(k, n); ++i) {
    std::size_t j = i + rng() % (n - i);
    std::swap(order[i], order[j]);
  }
  order.resize(std::min(k, n));
  return order;
}

// Mean corpus unigram probability of the segment's scorable tokens
// (stopwords excluded); ties broken by ordinal.
inline std::vector<std::size_t> avg_probability_baseline(
    const std::vector<std::vector<std::string>>& segment_words, std::size_t k,
    const std::set<std::string>& stopwords = default_stopwords()) {
  if (k < 1) throw InputError("avg_probability_baseline: k must be >= 1");
  std::map<std::string, double> counts;
  double total = 0;
  for (const auto& words : segment_words) {
    for (const auto& w : words) {
      if (stopwords.count(w)) continue;
      counts[w] += 1.0;
      total += 1.0;
    }
  }
  if (total == 0)
    throw InputError("avg_probability_baseline: no scorable tokens in corpus");
  const std::size_t n = segment_words.size();
  std::vector<double> scores(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0;
    std::size_t m = 0;
    for (const auto& w : segment_words[i]) {
      if (stopwords.count(w)) continue;
      sum += counts[w] / total;
      ++m;
    }
    scores[i] = m ? sum / static_cast<double>(m) : 0.0;
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  order.resize(std::min(k, n));
  return order;
}

struct SummaryEval {
  double js_divergence = 0.0;      // log base 2, in [0,1]
  double cosine_similarity = 0.0;  // mean embeddings
  double wmd = 0.0;
};

namespace detail {

inline std::map<std::string, double> unigram_distribution(
    const std::vector<std::vector<std::string>>& docs,
    const std::set<std::string>& stopwords) {
  std::map<std::string, double> dist;
  double total = 0;
  for (const auto& words : docs)
    for (const auto& w : words) {
      if (stopwords.count(w)) continue;
      dist[w] += 1.0;
      total += 1.0;
    }
  if (total == 0) throw InputError("unigram distribution is empty");
  for (auto& [w, c] : dist) c /= total;
  return dist;
}

inline double js_divergence_log2(const std::map<std::string, double>& p,
                                 const std::map<std::string, double>& q) {
  double js = 0;
  auto half_kl = [&](const std::map<std::string, double>& a,
                     const std::map<std::string, double>& b) {
    double kl = 0;
    for (const auto& [w, pa] : a) {
      auto it = b.find(w);
      double pb = it == b.end() ? 0.0 : it->second;
      double m = (pa + pb) / 2.0;
      kl += pa * std::log2(pa / m);
    }
    return kl;
  };
  js = 0.5 * half_kl(p, q) + 0.5 * half_kl(q, p);
  return js;
}

}  // namespace detail

// JS divergence (log2) between summary and source unigram distributions,
// cosine between mean embeddings, and WMD between summary and source nBOW.
inline SummaryEval evaluate_summary(
    const std::vector<std::size_t>& selection,
    const std::vector<std::vector<std::string>>& segment_words,
    const WordVectors& vectors,
    const std::set<std::string>& stopwords = default_stopwords(),
    const TransportConfig& transport = {}) {
  if (selection.empty()) throw InputError("evaluate_summary: empty selection");
  std::vector<std::size_t> ordered = selection;
  std::sort(ordered.begin(), ordered.end());
  std::vector<std::vector<std::string>> summary;
  for (std::size_t i : ordered) {
    if (i >= segment_words.size())
      throw InputError("evaluate_summary: selection index out of range");
    summary.push_back(segment_words[i]);
  }
  SummaryEval eval;
  auto p = detail::unigram_distribution(summary, stopwords);
  auto q = detail::unigram_distribution(segment_words, stopwords);
  eval.js_divergence = detail::js_divergence_log2(p, q);

  std::vector<std::string> summary_tokens, source_tokens;
  for (const auto& words : summary)
    summary_tokens.insert(summary_tokens.end(), words.begin(), words.end());
  for (const auto& words : segment_words)
    source_tokens.insert(source_tokens.end(), words.begin(), words.end());
  auto mean_s = detail::mean_embedding(summary_tokens, vectors);
  auto mean_q = detail::mean_embedding(source_tokens, vectors);
  eval.cosine_similarity = detail::cosine(mean_s, mean_q);

  auto nbow_s = doc_to_nbow(summary_tokens, vectors, stopwords);
  auto nbow_q = doc_to_nbow(source_tokens, vectors, stopwords);
  eval.wmd = wmd(nbow_s, nbow_q, vectors, transport);
  return eval;
}

struct TemplateEntry {
  std::string segment_id;
  double importance = 0.0;  // PageRank score over the full graph
  double mmr_score = 0.0;   // objective value at selection time
};

struct Template {
  std::string country;
  std::string category;
  std::size_t k = 0;
  double lambda = 0.5;
  std::vector<TemplateEntry> entries;
};

// PageRank + MMR template over one category's segments.
inline Template build_template(const SegmentGraph& g, std::size_t k,
                               double lambda, const PageRankConfig& pr_cfg = {}) {
  auto scores = pagerank(g, pr_cfg);
  auto picks = mmr_select(scores, g, k, lambda);
  Template tpl;
  tpl.k = k;
  tpl.lambda = lambda;
  for (std::size_t step = 0; step < picks.size(); ++step) {
    std::size_t s = picks[step];
    TemplateEntry entry;
    entry.segment_id = g.segment_ids[s];
    entry.importance = scores[s];
    if (step == 0) {
      entry.mmr_score = scores[s];
    } else {
      double max_sim = -std::numeric_limits<double>::infinity();
      for (std::size_t prior = 0; prior < step; ++prior)
        max_sim = std::max(max_sim, g.sim(s, picks[prior]));
      entry.mmr_score = lambda * scores[s] - (1.0 - lambda) * max_sim;
    }
    tpl.entries.push_back(entry);
  }
  return tpl;
}

}  // namespace polaudit
