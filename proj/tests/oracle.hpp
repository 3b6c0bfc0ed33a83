#pragma once

// Brute-force reference computations used by the tests. Nothing here calls
// into the library beyond building a Dataset for the random generators; the
// oracles work on plain row vectors and recount everything from scratch.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "mmbn/data.hpp"

namespace oracle {

using Parents = std::vector<int>;
using Graph = std::vector<Parents>;

struct Raw {
  std::vector<int> cards;
  std::vector<std::vector<int>> rows;  // 0-based, class in column 0
};

inline Raw raw_of(const mmbn::Dataset& ds) {
  Raw r;
  r.cards = ds.cardinalities();
  for (std::size_t m = 0; m < ds.num_samples(); ++m) r.rows.emplace_back(ds.row(m).begin(), ds.row(m).end());
  return r;
}

/// Random dataset with some dependence on the class so margins vary. Every
/// class value appears at least once.
inline mmbn::Dataset random_dataset(std::mt19937_64& rng, std::size_t n, int class_card, int feat_card_max,
                                    std::size_t m_samples) {
  std::vector<int> cards(n);
  cards[0] = class_card;
  for (std::size_t i = 1; i < n; ++i) cards[i] = 2 + static_cast<int>(rng() % static_cast<unsigned>(feat_card_max - 1));
  std::vector<int> values;
  for (std::size_t m = 0; m < m_samples; ++m) {
    const int c = m < static_cast<std::size_t>(class_card) ? static_cast<int>(m) : static_cast<int>(rng() % class_card);
    values.push_back(c);
    int prev = c;
    for (std::size_t i = 1; i < n; ++i) {
      int v;
      const auto roll = rng() % 10;
      if (roll < 4) {
        v = c % cards[i];
      } else if (roll < 6) {
        v = prev % cards[i];
      } else {
        v = static_cast<int>(rng() % static_cast<unsigned>(cards[i]));
      }
      values.push_back(v);
      prev = v;
    }
  }
  return mmbn::Dataset(cards, values);
}

// ---------------------------------------------------------------------------
// Parameters by direct counting

struct Counts {
  std::int64_t n_jh = 0;
  std::int64_t n_h = 0;
};

inline Counts count_of(const Raw& d, int i, const Parents& pa, const std::vector<int>& x) {
  Counts c;
  for (const auto& row : d.rows) {
    bool match = true;
    for (int p : pa) match = match && row[p] == x[p];
    if (!match) continue;
    ++c.n_h;
    if (row[i] == x[i]) ++c.n_jh;
  }
  return c;
}

inline double theta(const Raw& d, int i, const Parents& pa, const std::vector<int>& x, bool laplace) {
  const Counts c = count_of(d, i, pa, x);
  if (laplace) return (c.n_jh + 1.0) / (c.n_h + static_cast<double>(d.cards[i]));
  if (c.n_h == 0) return 1.0 / d.cards[i];
  return static_cast<double>(c.n_jh) / static_cast<double>(c.n_h);
}

inline double log_joint(const Raw& d, const Graph& g, const std::vector<int>& x, bool laplace = true) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += std::log(theta(d, static_cast<int>(i), g[i], x, laplace));
  return s;
}

/// Same data with the class collapsed to {0: class c, 1: anything else}.
inline Raw one_vs_all(const Raw& d, int c) {
  Raw r = d;
  r.cards[0] = 2;
  for (auto& row : r.rows) row[0] = row[0] == c ? 0 : 1;
  return r;
}

// ---------------------------------------------------------------------------
// Scores

inline double log_margin(const Raw& d, const Graph& g, std::size_t m) {
  std::vector<int> x = d.rows[m];
  const int own = x[0];
  const double lo = log_joint(d, g, x);
  double best = std::numeric_limits<double>::infinity();
  for (int c = 0; c < d.cards[0]; ++c) {
    if (c == own) continue;
    x[0] = c;
    best = std::min(best, lo - log_joint(d, g, x));
  }
  return best;
}

inline double sm_score(const Raw& d, const Graph& g, double gamma) {
  double s = 0.0;
  for (std::size_t m = 0; m < d.rows.size(); ++m) s += std::min(gamma, log_margin(d, g, m));
  return s;
}

inline double binary_log_margin(const Raw& d, const Graph& g, std::size_t m) {
  const Raw b = one_vs_all(d, d.rows[m][0]);
  std::vector<int> x = b.rows[m];  // class slot is 0
  const double own = log_joint(b, g, x);
  x[0] = 1;
  return own - log_joint(b, g, x);
}

inline double sbm_score(const Raw& d, const Graph& g, double gamma) {
  double s = 0.0;
  for (std::size_t m = 0; m < d.rows.size(); ++m) s += std::min(gamma, binary_log_margin(d, g, m));
  return s;
}

inline double mdl_family(const Raw& d, int i, const Parents& pa) {
  const double M = static_cast<double>(d.rows.size());
  double q = 1.0;
  for (int p : pa) q *= d.cards[p];
  // Distinct observed (config, value) pairs, each summed once.
  double ll = 0.0;
  std::vector<std::vector<int>> seen;
  for (const auto& row : d.rows) {
    std::vector<int> key;
    for (int p : pa) key.push_back(row[p]);
    key.push_back(row[i]);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(key);
    const Counts c = count_of(d, i, pa, row);
    ll += static_cast<double>(c.n_jh) * std::log2(static_cast<double>(c.n_jh) / static_cast<double>(c.n_h));
  }
  return ll - std::log2(M) / 2.0 * q * (d.cards[i] - 1);
}

inline double mdl_score(const Raw& d, const Graph& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += mdl_family(d, static_cast<int>(i), g[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Graphs

/// Depth-first cycle check.
inline bool acyclic(const Graph& g) {
  const std::size_t n = g.size();
  std::vector<int> state(n, 0);  // 0 new, 1 on stack, 2 done
  std::function<bool(int)> visit = [&](int v) {
    if (state[v] == 1) return false;
    if (state[v] == 2) return true;
    state[v] = 1;
    for (int p : g[v]) {
      if (!visit(p)) return false;
    }
    state[v] = 2;
    return true;
  };
  for (std::size_t v = 0; v < n; ++v) {
    if (!visit(static_cast<int>(v))) return false;
  }
  return true;
}

/// All subsets of {0..n-1} \ {i} with at most k elements.
inline std::vector<Parents> candidate_sets(int n, int i, int k) {
  std::vector<Parents> out;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (mask & (1u << i)) continue;
    Parents p;
    for (int v = 0; v < n; ++v) {
      if (mask & (1u << v)) p.push_back(v);
    }
    if (static_cast<int>(p.size()) <= k) out.push_back(p);
  }
  return out;
}

/// Calls f on every DAG whose parent sets have at most k parents.
template <typename F>
void for_each_dag(int n, int k, F&& f) {
  std::vector<std::vector<Parents>> cands(n);
  for (int i = 0; i < n; ++i) cands[i] = candidate_sets(n, i, k);
  Graph g(n);
  std::function<void(int)> rec = [&](int i) {
    if (i == n) {
      if (acyclic(g)) f(g);
      return;
    }
    for (const auto& p : cands[i]) {
      g[i] = p;
      rec(i + 1);
    }
  };
  rec(0);
}

template <typename Score>
double best_dag_score(int n, int k, Score&& score) {
  double best = -std::numeric_limits<double>::infinity();
  for_each_dag(n, k, [&](const Graph& g) { best = std::max(best, score(g)); });
  return best;
}

/// Feasibility of o_j - o_i >= w_ij, 0 <= o <= delta, by Bellman-Ford on the
/// difference-constraint graph (source node n pins o to [0, delta]).
inline bool difference_system_feasible(const std::vector<std::vector<double>>& w, double delta) {
  const std::size_t n = w.size();
  // Edge u -> v with weight c encodes o_v <= o_u + c.
  struct Edge {
    std::size_t u, v;
    double c;
  };
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) edges.push_back({j, i, -w[i][j]});  // o_i <= o_j - w_ij
    }
    edges.push_back({n, i, delta});  // o_i <= z + delta
    edges.push_back({i, n, 0.0});    // z <= o_i
  }
  std::vector<double> dist(n + 1, 0.0);
  const double eps = 1e-12 * std::max(1.0, delta);
  for (std::size_t round = 0; round <= n + 1; ++round) {
    bool changed = false;
    for (const auto& e : edges) {
      if (dist[e.u] + e.c < dist[e.v] - eps) {
        dist[e.v] = dist[e.u] + e.c;
        changed = true;
      }
    }
    if (!changed) return true;
  }
  return false;
}

}  // namespace oracle
