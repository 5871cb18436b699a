#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "polaudit/errors.hpp"
#include "polaudit/transport.hpp"

namespace polaudit {

struct SimilarityGraph {
  struct Edge {
    std::size_t i, j;  // i < j, indices into nodes
    double weight;     // in (0, 1]
  };
  std::vector<std::string> nodes;  // every id, including isolated ones
  std::vector<Edge> edges;
  double threshold = 0.0;

  std::vector<std::size_t> degrees() const {
    std::vector<std::size_t> deg(nodes.size(), 0);
    for (const auto& e : edges) {
      ++deg[e.i];
      ++deg[e.j];
    }
    return deg;
  }
};

inline SimilarityGraph build_graph(const SimilarityMatrix& s, double threshold) {
  if (!(threshold >= 0.0 && threshold < 1.0))
    throw InputError("build_graph: threshold must lie in [0,1)");
  SimilarityGraph g;
  g.nodes = s.ids;
  g.threshold = threshold;
  const std::size_t n = s.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (s.at(i, j) > threshold) g.edges.push_back({i, j, s.at(i, j)});
  return g;
}

struct CommunityQuality {
  std::size_t size = 0;
  double cut_ratio = 0.0;
  double conductance = 0.0;
};

struct CommunityPartition {
  // community id per covered node index; SIZE_MAX for isolated nodes.
  std::vector<std::size_t> assignment;
  std::vector<std::vector<std::size_t>> communities;  // node indices
  std::vector<std::size_t> isolated;                  // degree-0 nodes
  double modularity = 0.0;
  std::vector<CommunityQuality> per_community;
};

// Weighted modularity Q = sum_c [ W_c/W - (S_c/2W)^2 ] over the partition,
// where W is total edge weight, W_c intra-community weight and S_c the
// weighted degree sum of the community.
inline double modularity(const SimilarityGraph& g,
                         const std::vector<std::size_t>& assignment) {
  auto deg = g.degrees();
  double total_weight = 0;
  for (const auto& e : g.edges) total_weight += e.weight;
  if (total_weight <= 0) throw InputError("modularity: graph has no edges");
  std::size_t n_comms = 0;
  for (std::size_t v = 0; v < g.nodes.size(); ++v) {
    if (deg[v] == 0) continue;
    if (v >= assignment.size() || assignment[v] == SIZE_MAX)
      throw InputError("modularity: node outside assignment");
    n_comms = std::max(n_comms, assignment[v] + 1);
  }
  std::vector<double> intra(n_comms, 0.0), strength(n_comms, 0.0);
  for (const auto& e : g.edges) {
    if (assignment[e.i] == assignment[e.j]) intra[assignment[e.i]] += e.weight;
    strength[assignment[e.i]] += e.weight;
    strength[assignment[e.j]] += e.weight;
  }
  double q = 0;
  for (std::size_t c = 0; c < n_comms; ++c) {
    double frac = strength[c] / (2.0 * total_weight);
    q += intra[c] / total_weight - frac * frac;
  }
  return q;
}

// Unweighted boundary edge count over |S| * (n - |S|).
inline double cut_ratio(const SimilarityGraph& g,
                        const std::set<std::size_t>& community) {
  const std::size_t n = g.nodes.size();
  if (community.empty() || community.size() >= n)
    throw InputError("cut_ratio: community must be a proper non-empty subset");
  std::size_t boundary = 0;
  for (const auto& e : g.edges) {
    bool in_i = community.count(e.i) > 0;
    bool in_j = community.count(e.j) > 0;
    if (in_i != in_j) ++boundary;
  }
  return static_cast<double>(boundary) /
         (static_cast<double>(community.size()) *
          static_cast<double>(n - community.size()));
}

// c_S / (2 m_S + c_S) with unweighted edge counts.
inline double conductance(const SimilarityGraph& g,
                          const std::set<std::size_t>& community) {
  const std::size_t n = g.nodes.size();
  if (community.empty() || community.size() >= n)
    throw InputError("conductance: community must be a proper non-empty subset");
  std::size_t boundary = 0, internal = 0;
  for (const auto& e : g.edges) {
    bool in_i = community.count(e.i) > 0;
    bool in_j = community.count(e.j) > 0;
    if (in_i && in_j)
      ++internal;
    else if (in_i != in_j)
      ++boundary;
  }
  if (boundary + internal == 0)
    throw InputError("conductance: community has no incident edges");
  return static_cast<double>(boundary) /
         (2.0 * static_cast<double>(internal) + static_cast<double>(boundary));
}

// Fraction of nodes with degree >= 1 over the given total.
inline double coverage(const SimilarityGraph& g, std::size_t total_nodes) {
  if (total_nodes < g.nodes.size())
    throw InputError("coverage: total below graph size");
  if (total_nodes == 0) return 0.0;
  auto deg = g.degrees();
  std::size_t covered = 0;
  for (std::size_t d : deg)
    if (d > 0) ++covered;
  return static_cast<double>(covered) / static_cast<double>(total_nodes);
}

namespace detail {

struct LouvainLevel {
  std::size_t n = 0;
  std::vector<std::vector<std::pair<std::size_t, double>>> adj;  // no self loops
  std::vector<double> loop;  // self-loop weight (aggregated internals)
};

// Deterministic Fisher-Yates; mt19937 output is pinned by the standard, so
// fixed seeds give identical orders on every platform.
inline void seeded_shuffle(std::vector<std::size_t>& order, std::mt19937& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    std::size_t j = rng() % i;
    std::swap(order[i - 1], order[j]);
  }
}

inline std::vector<std::size_t> louvain_one_level(const LouvainLevel& level,
                                                  double total_weight,
                                                  std::mt19937& rng,
                                                  bool* moved_any) {
  const std::size_t n = level.n;
  std::vector<std::size_t> comm(n);
  std::vector<double> k(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    comm[v] = v;
    for (const auto& [w, wt] : level.adj[v]) {
      (void)w;
      k[v] += wt;
    }
    k[v] += 2.0 * level.loop[v];
  }
  std::vector<double> sigma_tot = k;  // degree sum per community

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  seeded_shuffle(order, rng);

  std::vector<double> weight_to(n, 0.0);
  *moved_any = false;
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t v : order) {
      std::vector<std::size_t> touched;
      for (const auto& [w, wt] : level.adj[v]) {
        std::size_t c = comm[w];
        if (weight_to[c] == 0.0) touched.push_back(c);
        weight_to[c] += wt;
      }
      std::size_t own = comm[v];
      sigma_tot[own] -= k[v];
      double base = weight_to[own] - sigma_tot[own] * k[v] / (2.0 * total_weight);
      double best_gain = base;
      std::size_t best = own;
      std::sort(touched.begin(), touched.end());
      for (std::size_t c : touched) {
        if (c == own) continue;
        double gain = weight_to[c] - sigma_tot[c] * k[v] / (2.0 * total_weight);
        if (gain > best_gain + 1e-15) {
          best_gain = gain;
          best = c;
        }
      }
      sigma_tot[best] += k[v];
      if (best != own) {
        comm[v] = best;
        improved = true;
        *moved_any = true;
      }
      for (std::size_t c : touched) weight_to[c] = 0.0;
      if (weight_to[own] != 0.0) weight_to[own] = 0.0;
    }
  }
  return comm;
}

inline LouvainLevel aggregate(const LouvainLevel& level,
                              const std::vector<std::size_t>& comm,
                              std::vector<std::size_t>& renumber) {
  renumber.assign(level.n, SIZE_MAX);
  std::size_t next = 0;
  for (std::size_t v = 0; v < level.n; ++v)
    if (renumber[comm[v]] == SIZE_MAX) renumber[comm[v]] = next++;
  LouvainLevel out;
  out.n = next;
  out.adj.assign(next, {});
  out.loop.assign(next, 0.0);
  std::map<std::pair<std::size_t, std::size_t>, double> cross;
  for (std::size_t v = 0; v < level.n; ++v) {
    std::size_t cv = renumber[comm[v]];
    out.loop[cv] += level.loop[v];
    for (const auto& [w, wt] : level.adj[v]) {
      if (w < v) continue;  // each undirected edge once
      std::size_t cw = renumber[comm[w]];
      if (cv == cw)
        out.loop[cv] += wt;
      else
        cross[{std::min(cv, cw), std::max(cv, cw)}] += wt;
    }
  }
  for (const auto& [key, wt] : cross) {
    out.adj[key.first].emplace_back(key.second, wt);
    out.adj[key.second].emplace_back(key.first, wt);
  }
  return out;
}

}  // namespace detail

// Two-phase Louvain on weighted modularity. Node visitation order is a
// seeded shuffle; isolated nodes are excluded from communities and reported
// separately. Reported modularity is recomputed from the final partition.
inline CommunityPartition louvain(const SimilarityGraph& g, std::uint32_t seed) {
  if (g.edges.empty()) throw InputError("louvain: graph has no edges");
  auto deg = g.degrees();
  CommunityPartition part;
  part.assignment.assign(g.nodes.size(), SIZE_MAX);

  std::vector<std::size_t> compact(g.nodes.size(), SIZE_MAX);
  std::vector<std::size_t> original;
  for (std::size_t v = 0; v < g.nodes.size(); ++v) {
    if (deg[v] == 0) {
      part.isolated.push_back(v);
    } else {
      compact[v] = original.size();
      original.push_back(v);
    }
  }

  detail::LouvainLevel level;
  level.n = original.size();
  level.adj.assign(level.n, {});
  level.loop.assign(level.n, 0.0);
  double total_weight = 0;
  for (const auto& e : g.edges) {
    level.adj[compact[e.i]].emplace_back(compact[e.j], e.weight);
    level.adj[compact[e.j]].emplace_back(compact[e.i], e.weight);
    total_weight += e.weight;
  }

  std::mt19937 rng(seed);
  // node -> community, composed across levels
  std::vector<std::size_t> membership(level.n);
  for (std::size_t i = 0; i < level.n; ++i) membership[i] = i;

  for (;;) {
    bool moved = false;
    auto comm = detail::louvain_one_level(level, total_weight, rng, &moved);
    std::vector<std::size_t> renumber;
    auto next = detail::aggregate(level, comm, renumber);
    for (auto& m : membership) m = renumber[comm[m]];
    if (!moved || next.n == level.n) break;
    level = std::move(next);
  }

  // Renumber final communities by smallest original node index.
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < membership.size(); ++i)
    groups[membership[i]].push_back(original[i]);
  std::vector<std::vector<std::size_t>> comms;
  for (auto& [cid, members] : groups) comms.push_back(std::move(members));
  std::sort(comms.begin(), comms.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  for (std::size_t c = 0; c < comms.size(); ++c)
    for (std::size_t v : comms[c]) part.assignment[v] = c;
  part.communities = std::move(comms);
  part.modularity = modularity(g, part.assignment);

  for (const auto& members : part.communities) {
    std::set<std::size_t> s(members.begin(), members.end());
    CommunityQuality qual;
    qual.size = members.size();
    if (s.size() < g.nodes.size()) {
      qual.cut_ratio = cut_ratio(g, s);
      qual.conductance = conductance(g, s);
    }
    part.per_community.push_back(qual);
  }
  return part;
}

struct SweepRow {
  double threshold = 0.0;
  double modularity = 0.0;
  double mean_cut_ratio = 0.0;
  double mean_conductance = 0.0;
  double coverage = 0.0;
  std::size_t n_communities_ge2 = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::optional<double> recommended;
};

struct SweepOptions {
  double coverage_floor = 0.5;
  unsigned threads = 0;
};

// One Louvain run per threshold. Recommendation: among thresholds meeting the
// coverage floor, maximum modularity; ties broken by lower mean conductance,
// then lower threshold. The full table is always returned for human review.
inline SweepResult threshold_sweep(const SimilarityMatrix& s,
                                   const std::vector<double>& grid,
                                   std::uint32_t seed,
                                   const SweepOptions& opt = {}) {
  if (grid.empty()) throw InputError("threshold_sweep: empty grid");
  for (double t : grid)
    if (!(t >= 0.0 && t < 1.0))
      throw InputError("threshold_sweep: thresholds must lie in [0,1)");
  SweepResult result;
  result.rows.resize(grid.size());

  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      std::size_t k = next.fetch_add(1);
      if (k >= grid.size()) return;
      SweepRow row;
      row.threshold = grid[k];
      auto g = build_graph(s, grid[k]);
      row.coverage = coverage(g, g.nodes.size());
      if (!g.edges.empty()) {
        auto part = louvain(g, seed);
        row.modularity = part.modularity;
        double cr = 0, cond = 0;
        for (const auto& q : part.per_community) {
          cr += q.cut_ratio;
          cond += q.conductance;
          if (q.size >= 2) ++row.n_communities_ge2;
        }
        if (!part.per_community.empty()) {
          cr /= static_cast<double>(part.per_community.size());
          cond /= static_cast<double>(part.per_community.size());
        }
        row.mean_cut_ratio = cr;
        row.mean_conductance = cond;
      }
      result.rows[k] = row;
    }
  };
  unsigned workers = opt.threads ? opt.threads
                                 : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(grid.size()));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  const SweepRow* best = nullptr;
  for (const auto& row : result.rows) {
    if (row.coverage < opt.coverage_floor) continue;
    if (!best || row.modularity > best->modularity ||
        (row.modularity == best->modularity &&
         (row.mean_conductance < best->mean_conductance ||
          (row.mean_conductance == best->mean_conductance &&
           row.threshold < best->threshold)))) {
      best = &row;
    }
  }
  if (best) result.recommended = best->threshold;
  return result;
}

// Adjusted Rand Index between two labelings of the same items.
inline double adjusted_rand_index(const std::vector<std::size_t>& a,
                                  const std::vector<std::size_t>& b) {
  if (a.size() != b.size() || a.empty())
    throw InputError("adjusted_rand_index: label vectors must match");
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  std::map<std::size_t, double> ca, cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ca[a[i]] += 1;
    cb[b[i]] += 1;
  }
  auto choose2 = [](double x) { return x * (x - 1) / 2.0; };
  double sum_joint = 0, sum_a = 0, sum_b = 0;
  for (const auto& [k, v] : joint) sum_joint += choose2(v);
  for (const auto& [k, v] : ca) sum_a += choose2(v);
  for (const auto& [k, v] : cb) sum_b += choose2(v);
  double total = choose2(static_cast<double>(a.size()));
  double expected = sum_a * sum_b / total;
  double max_index = (sum_a + sum_b) / 2.0;
  if (max_index == expected) return 1.0;  // both trivial partitions
  return (sum_joint - expected) / (max_index - expected);
}

}  // namespace polaudit
