#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "polaudit/embeddings.hpp"
#include "polaudit/errors.hpp"
#include "polaudit/strings.hpp"

namespace polaudit {

struct TransportConfig {
  double tolerance = 1e-9;            // required primal-dual gap at optimum
  std::size_t max_doc_types = 500;    // truncate-by-weight cap per document
  bool cosine_normalize = false;      // unit-normalize vectors before distances
  std::optional<double> prefilter_cutoff;  // pairwise: skip pairs above bound
  unsigned threads = 0;               // 0 = hardware concurrency
};

namespace detail {

// Exact solver for the dense transportation problem
//   min sum_ij T_ij * c_ij   s.t.  sum_j T_ij = p_i, sum_i T_ij = q_j, T >= 0
// via the primal network simplex on the bipartite basis tree (u-v method).
// Pivot selection is most-negative reduced cost with an automatic switch to
// Bland's rule if the pivot budget stalls, which rules out cycling under
// degeneracy. Terminates with a certificate: primal cost minus dual objective.
class TransportSimplex {
public:
  TransportSimplex(const std::vector<double>& supply,
                   const std::vector<double>& demand,
                   const std::vector<double>& cost)  // row-major m x n
      : m_(supply.size()), n_(demand.size()), cost_(cost) {
    flows_.assign(m_ * n_, 0.0);
    basic_.assign(m_ * n_, false);
    northwest_corner(supply, demand);
  }

  struct Result {
    double cost = 0;
    double gap = 0;
    std::size_t pivots = 0;
  };

  Result solve() {
    const std::size_t node_count = m_ + n_;
    const std::size_t max_pivots = 1000 + 60 * node_count * node_count;
    const std::size_t bland_after = max_pivots / 2;
    double max_cost = 0;
    for (double c : cost_) max_cost = std::max(max_cost, std::abs(c));
    const double enter_tol = 1e-12 * std::max(1.0, max_cost);

    Result res;
    std::vector<double> u(m_), v(n_);
    for (;;) {
      compute_duals(u, v);
      std::size_t ei = m_, ej = n_;
      double best = -enter_tol;
      bool bland = res.pivots >= bland_after;
      for (std::size_t i = 0; i < m_ && (ei == m_ || !bland); ++i) {
        for (std::size_t j = 0; j < n_; ++j) {
          if (basic_[i * n_ + j]) continue;
          double r = cost_[i * n_ + j] - u[i] - v[j];
          if (r < best) {
            best = r;
            ei = i;
            ej = j;
            if (bland) break;
          }
        }
      }
      if (ei == m_) break;  // optimal
      pivot(ei, ej);
      if (++res.pivots > max_pivots)
        throw ConvergenceError("transport simplex exceeded pivot budget",
                               std::abs(best));
    }
    double primal = 0;
    for (std::size_t k = 0; k < m_ * n_; ++k) primal += flows_[k] * cost_[k];
    double dual = 0;
    for (std::size_t i = 0; i < m_; ++i) dual += u_final_[i] * supply_[i];
    for (std::size_t j = 0; j < n_; ++j) dual += v_final_[j] * demand_[j];
    res.cost = primal;
    res.gap = primal - dual;
    return res;
  }

private:
  void northwest_corner(const std::vector<double>& supply,
                        const std::vector<double>& demand) {
    supply_ = supply;
    demand_ = demand;
    std::vector<double> a = supply, b = demand;
    std::size_t i = 0, j = 0;
    for (;;) {
      double t = std::min(a[i], b[j]);
      if (t < 0) t = 0;
      flows_[i * n_ + j] = t;
      basic_[i * n_ + j] = true;
      basis_arcs_.emplace_back(i, j);
      a[i] -= t;
      b[j] -= t;
      if (i == m_ - 1 && j == n_ - 1) break;
      if (a[i] <= b[j] && i < m_ - 1)
        ++i;
      else
        ++j;
    }
  }

  // Propagate u_i + v_j = c_ij over the basis tree from u_0 = 0.
  void compute_duals(std::vector<double>& u, std::vector<double>& v) {
    const std::size_t nodes = m_ + n_;
    std::vector<std::vector<std::size_t>> adj(nodes);
    for (std::size_t k = 0; k < basis_arcs_.size(); ++k) {
      auto [i, j] = basis_arcs_[k];
      adj[i].push_back(k);
      adj[m_ + j].push_back(k);
    }
    std::vector<bool> seen(nodes, false);
    std::vector<std::size_t> stack = {0};
    u[0] = 0;
    seen[0] = true;
    while (!stack.empty()) {
      std::size_t node = stack.back();
      stack.pop_back();
      for (std::size_t k : adj[node]) {
        auto [i, j] = basis_arcs_[k];
        std::size_t other = (node == i) ? m_ + j : i;
        if (seen[other]) continue;
        seen[other] = true;
        if (other >= m_)
          v[other - m_] = cost_[i * n_ + j] - u[i];
        else
          u[other] = cost_[i * n_ + j] - v[node - m_];
        stack.push_back(other);
      }
    }
    u_final_ = u;
    v_final_ = v;
  }

  // Close the unique basis-tree cycle through the entering arc, shift the
  // limiting flow around it, and swap the entering/leaving arcs.
  void pivot(std::size_t ei, std::size_t ej) {
    const std::size_t nodes = m_ + n_;
    std::vector<std::vector<std::size_t>> adj(nodes);
    for (std::size_t k = 0; k < basis_arcs_.size(); ++k) {
      auto [i, j] = basis_arcs_[k];
      adj[i].push_back(k);
      adj[m_ + j].push_back(k);
    }
    // Path from source ei to sink ej in the tree.
    std::vector<std::size_t> parent_arc(nodes, SIZE_MAX);
    std::vector<std::size_t> parent_node(nodes, SIZE_MAX);
    std::vector<bool> seen(nodes, false);
    std::vector<std::size_t> stack = {ei};
    seen[ei] = true;
    while (!stack.empty()) {
      std::size_t node = stack.back();
      stack.pop_back();
      if (node == m_ + ej) break;
      for (std::size_t k : adj[node]) {
        auto [i, j] = basis_arcs_[k];
        std::size_t other = (node == i) ? m_ + j : i;
        if (seen[other]) continue;
        seen[other] = true;
        parent_arc[other] = k;
        parent_node[other] = node;
        stack.push_back(other);
      }
    }
    // Arcs on the path, walking back from the sink.
    std::vector<std::size_t> path;
    for (std::size_t node = m_ + ej; node != ei; node = parent_node[node])
      path.push_back(parent_arc[node]);
    // The entering arc carries +theta; alternate signs along the path
    // starting at the sink end.
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = SIZE_MAX;
    for (std::size_t s = 0; s < path.size(); ++s) {
      if (s % 2 != 0) continue;  // minus arcs
      auto [i, j] = basis_arcs_[path[s]];
      double f = flows_[i * n_ + j];
      if (f < theta ||
          (f == theta && leave != SIZE_MAX &&
           basis_arcs_[path[s]] < basis_arcs_[leave])) {
        theta = f;
        leave = path[s];
      }
    }
    for (std::size_t s = 0; s < path.size(); ++s) {
      auto [i, j] = basis_arcs_[path[s]];
      flows_[i * n_ + j] += (s % 2 == 0) ? -theta : theta;
    }
    flows_[ei * n_ + ej] += theta;
    auto [li, lj] = basis_arcs_[leave];
    basic_[li * n_ + lj] = false;
    flows_[li * n_ + lj] = 0;
    basic_[ei * n_ + ej] = true;
    basis_arcs_[leave] = {ei, ej};
  }

  std::size_t m_, n_;
  std::vector<double> cost_;
  std::vector<double> flows_;
  std::vector<bool> basic_;
  std::vector<std::pair<std::size_t, std::size_t>> basis_arcs_;
  std::vector<double> supply_, demand_, u_final_, v_final_;
};

inline std::vector<double> ground_costs(const DocDistribution& p,
                                        const DocDistribution& q,
                                        const WordVectors& vectors,
                                        bool cosine_normalize) {
  std::vector<double> cost(p.size() * q.size());
  auto norm_of = [&](std::size_t row) {
    const double* x = vectors.row(row);
    double s = 0;
    for (std::size_t k = 0; k < vectors.dim; ++k) s += x[k] * x[k];
    return std::sqrt(s);
  };
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < q.size(); ++j) {
      if (!cosine_normalize) {
        cost[i * q.size() + j] = vectors.euclidean(p.indices[i], q.indices[j]);
      } else {
        const double* a = vectors.row(p.indices[i]);
        const double* b = vectors.row(q.indices[j]);
        double na = norm_of(p.indices[i]), nb = norm_of(q.indices[j]);
        double s = 0;
        for (std::size_t k = 0; k < vectors.dim; ++k) {
          double d = (na > 0 ? a[k] / na : 0.0) - (nb > 0 ? b[k] / nb : 0.0);
          s += d * d;
        }
        cost[i * q.size() + j] = std::sqrt(s);
      }
    }
  }
  return cost;
}

}  // namespace detail

// Keeps the max_types heaviest entries (ties: lower vocab index), renormalized.
// Returns true when truncation actually dropped something.
inline bool truncate_distribution(DocDistribution& dist, std::size_t max_types) {
  if (dist.size() <= max_types) return false;
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dist.weights[a] != dist.weights[b])
      return dist.weights[a] > dist.weights[b];
    return dist.indices[a] < dist.indices[b];
  });
  order.resize(max_types);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) {
              return dist.indices[a] < dist.indices[b];
            });
  DocDistribution kept;
  double total = 0;
  for (std::size_t k : order) total += dist.weights[k];
  for (std::size_t k : order) {
    kept.indices.push_back(dist.indices[k]);
    kept.weights.push_back(dist.weights[k] / total);
  }
  dist = std::move(kept);
  return true;
}

// Exact Word Mover Distance: optimal-transport cost between two nBOW
// distributions with Euclidean ground metric on the word vectors.
inline double wmd(const DocDistribution& p, const DocDistribution& q,
                  const WordVectors& vectors, const TransportConfig& cfg = {}) {
  if (p.empty() || q.empty()) throw InputError("wmd: empty distribution");
  if (p.indices == q.indices && p.weights == q.weights) return 0.0;
  DocDistribution pc = p, qc = q;
  truncate_distribution(pc, cfg.max_doc_types);
  truncate_distribution(qc, cfg.max_doc_types);
  auto cost = detail::ground_costs(pc, qc, vectors, cfg.cosine_normalize);
  detail::TransportSimplex solver(pc.weights, qc.weights, cost);
  auto result = solver.solve();
  if (std::abs(result.gap) > cfg.tolerance)
    throw ConvergenceError("wmd: primal-dual gap above tolerance", result.gap);
  return result.cost;
}

// Lower bound: each side's mass moves to its nearest counterpart; the max of
// the two one-sided relaxations never exceeds the exact distance.
inline double relaxed_wmd(const DocDistribution& p, const DocDistribution& q,
                          const WordVectors& vectors,
                          const TransportConfig& cfg = {}) {
  if (p.empty() || q.empty()) throw InputError("relaxed_wmd: empty distribution");
  if (p.indices == q.indices && p.weights == q.weights) return 0.0;
  DocDistribution pc = p, qc = q;
  truncate_distribution(pc, cfg.max_doc_types);
  truncate_distribution(qc, cfg.max_doc_types);
  auto cost = detail::ground_costs(pc, qc, vectors, cfg.cosine_normalize);
  const std::size_t m = pc.size(), n = qc.size();
  double lb_p = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      best = std::min(best, cost[i * n + j]);
    lb_p += pc.weights[i] * best;
  }
  double lb_q = 0;
  for (std::size_t j = 0; j < n; ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i)
      best = std::min(best, cost[i * n + j]);
    lb_q += qc.weights[j] * best;
  }
  return std::max(lb_p, lb_q);
}

struct DistanceMatrix {
  std::vector<std::string> ids;
  std::vector<double> values;  // n x n row-major, symmetric, zero diagonal
  std::vector<std::pair<std::size_t, std::size_t>> approximate_pairs;
  std::vector<std::string> excluded_ids;  // empty distributions, tallied

  std::size_t size() const { return ids.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
};

struct SimilarityMatrix {
  std::vector<std::string> ids;
  std::vector<double> values;  // entries in [0,1], diagonal 1

  std::size_t size() const { return ids.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
};

// All n(n-1)/2 exact WMDs. With a prefilter cutoff, pairs whose relaxed lower
// bound already exceeds the cutoff keep the bound value and are flagged.
inline DistanceMatrix pairwise_distances(const std::vector<std::string>& ids,
                                         const std::vector<DocDistribution>& docs,
                                         const WordVectors& vectors,
                                         const TransportConfig& cfg = {}) {
  if (ids.size() != docs.size())
    throw InputError("pairwise_distances: ids/docs size mismatch");
  DistanceMatrix dm;
  std::vector<const DocDistribution*> kept;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (docs[i].empty()) {
      dm.excluded_ids.push_back(ids[i]);
    } else {
      dm.ids.push_back(ids[i]);
      kept.push_back(&docs[i]);
    }
  }
  const std::size_t n = kept.size();
  if (n < 2) throw InputError("pairwise_distances: need at least two documents");
  dm.values.assign(n * n, 0.0);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

  std::vector<char> approx(pairs.size(), 0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr worker_error;
  std::mutex error_mutex;
  unsigned workers = cfg.threads ? cfg.threads
                                 : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(pairs.size()));
  auto work = [&]() {
    try {
      for (;;) {
        std::size_t k = next.fetch_add(1);
        if (k >= pairs.size()) return;
        auto [i, j] = pairs[k];
        double d;
        if (cfg.prefilter_cutoff) {
          double bound = relaxed_wmd(*kept[i], *kept[j], vectors, cfg);
          if (bound > *cfg.prefilter_cutoff) {
            d = bound;
            approx[k] = 1;
          } else {
            d = wmd(*kept[i], *kept[j], vectors, cfg);
          }
        } else {
          d = wmd(*kept[i], *kept[j], vectors, cfg);
        }
        dm.values[i * n + j] = d;
        dm.values[j * n + i] = d;
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!worker_error) worker_error = std::current_exception();
      next.store(pairs.size());  // drain the queue
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (unsigned t = 0; t < workers; ++t) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  if (worker_error) std::rethrow_exception(worker_error);
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if (approx[k]) dm.approximate_pairs.push_back(pairs[k]);
  return dm;
}

// Global min-max rescale over off-diagonal entries: s = 1 - (d - min)/(max - min).
// The farthest pair maps to 0, the closest to 1; diagonal fixed at 1.
inline SimilarityMatrix normalize_similarities(const DistanceMatrix& d) {
  const std::size_t n = d.size();
  if (n < 2) throw InputError("normalize_similarities: need n >= 2");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      lo = std::min(lo, d.at(i, j));
      hi = std::max(hi, d.at(i, j));
    }
  }
  if (!(hi - lo > 0))
    throw DegenerateInputError(
        "normalize_similarities: all off-diagonal distances equal");
  SimilarityMatrix s;
  s.ids = d.ids;
  s.values.assign(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) s.values[i * n + j] = 1.0 - (d.at(i, j) - lo) / (hi - lo);
  return s;
}

namespace detail {

template <typename Matrix>
void write_matrix_csv(const Matrix& m, std::ostream& out) {
  out << "ids";
  for (const auto& id : m.ids) out << ',' << id;
  out << '\n';
  char buf[64];
  const std::size_t n = m.size();
  for (std::size_t i = 0; i < n; ++i) {
    out << m.ids[i];
    for (std::size_t j = 0; j < n; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m.values[i * n + j]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

template <typename Matrix>
Matrix read_matrix_csv(std::istream& in) {
  Matrix m;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty matrix file", 1);
  auto header = split(trim(line), ',');
  if (header.empty() || header[0] != "ids")
    throw ParseError("matrix header must start with 'ids'", 1);
  m.ids.assign(header.begin() + 1, header.end());
  const std::size_t n = m.ids.size();
  m.values.assign(n * n, 0.0);
  std::size_t row = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_view(line).empty()) continue;
    auto fields = split(trim(line), ',');
    if (fields.size() != n + 1)
      throw ParseError("matrix row has wrong field count", line_no);
    if (row >= n) throw ParseError("too many matrix rows", line_no);
    if (fields[0] != m.ids[row])
      throw ParseError("row id '" + fields[0] + "' out of order", line_no);
    for (std::size_t j = 0; j < n; ++j)
      m.values[row * n + j] = detail::parse_double(fields[j + 1], line_no);
    ++row;
  }
  if (row != n) throw ParseError("matrix truncated", line_no);
  return m;
}

}  // namespace detail

inline void save_distance_matrix(const DistanceMatrix& m, std::ostream& out) {
  detail::write_matrix_csv(m, out);
}
inline void save_similarity_matrix(const SimilarityMatrix& m, std::ostream& out) {
  detail::write_matrix_csv(m, out);
}
inline DistanceMatrix load_distance_matrix(std::istream& in) {
  return detail::read_matrix_csv<DistanceMatrix>(in);
}
inline SimilarityMatrix load_similarity_matrix(std::istream& in) {
  return detail::read_matrix_csv<SimilarityMatrix>(in);
}

}  // namespace polaudit
