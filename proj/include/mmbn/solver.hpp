#pragma once

// Any-time branch-and-bound over the LP relaxation of the structure MILP.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mmbn/catalog.hpp"
#include "mmbn/lp.hpp"
#include "mmbn/milp.hpp"

namespace mmbn {

enum class NodeOrder { best_first, depth_first };
enum class BranchRule { most_fractional, first_fractional };

enum class SolveStatus { optimal, feasible_timeout, infeasible, no_incumbent };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::feasible_timeout: return "feasible-timeout";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::no_incumbent: return "no-incumbent";
  }
  return "?";
}

struct SolverConfig {
  double time_limit = 7200.0;  // seconds
  double gap_tol = 1e-6;       // percent
  NodeOrder node_order = NodeOrder::best_first;
  BranchRule branch_rule = BranchRule::most_fractional;
  std::size_t threads = 1;
  double integrality_tol = 1e-6;
  std::size_t max_nodes = 0;  // 0: unlimited
  bool warm_start = true;
  std::ostream* log = nullptr;
  double log_interval = 5.0;  // seconds between progress lines
};

/// Sub-optimality gap in percent: 100 (zbar - z) / zbar. Infinite without
/// an incumbent, or when zbar <= 0 while z < zbar (the ratio is undefined).
inline double gap_percent(double z, double zbar, bool has_incumbent) {
  if (!has_incumbent) return std::numeric_limits<double>::infinity();
  if (zbar == z) return 0.0;
  if (zbar <= 0.0) return std::numeric_limits<double>::infinity();
  return 100.0 * (zbar - z) / zbar;
}

struct TracePoint {
  std::size_t node = 0;
  double incumbent = 0.0;
  double bound = 0.0;
  double seconds = 0.0;
};

struct SolveResult {
  std::optional<Structure> incumbent;
  double objective = -std::numeric_limits<double>::infinity();  // z
  double upper_bound = std::numeric_limits<double>::infinity();  // zbar
  double gap_percent = std::numeric_limits<double>::infinity();
  SolveStatus status = SolveStatus::no_incumbent;
  std::size_t nodes_explored = 0;
  double wall_time = 0.0;
  double root_bound = std::numeric_limits<double>::infinity();
  /// Largest (child LP bound - parent bound) seen; should stay <= 1e-7.
  double max_bound_excess = -std::numeric_limits<double>::infinity();
  /// Incumbent/bound snapshots at every incumbent improvement.
  std::vector<TracePoint> trace;
};

inline void to_json(nlohmann::json& j, const SolveResult& r, bool include_timing) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : "-inf";
  };
  j = nlohmann::json::object();
  j["status"] = to_string(r.status);
  j["objective"] = num(r.objective);
  j["upper_bound"] = num(r.upper_bound);
  j["gap_percent"] = num(r.gap_percent);
  j["nodes_explored"] = r.nodes_explored;
  j["root_bound"] = num(r.root_bound);
  if (r.incumbent) {
    j["incumbent"] = *r.incumbent;
  } else {
    j["incumbent"] = nullptr;
  }
  if (include_timing) j["wall_time"] = r.wall_time;
}

/// Exact objective of a binary selection: for margin models
/// sum_m min(gamma, min over sample m's rows of the row's eta part),
/// otherwise the linear objective.
inline double model_score(const MilpModel& model, std::span<const double> eta) {
  const LinearProgram& lp = model.lp;
  if (model.kind == ScoreKind::mdl) {
    double s = 0.0;
    for (std::size_t p = 0; p < model.num_eta; ++p) s += lp.objective[p] * eta[p];
    return s;
  }
  std::vector<double> tau(model.num_tau, model.gamma);
  for (std::size_t r = 0; r < model.num_margin_rows; ++r) {
    const SparseRow& row = lp.rows[r];
    double v = 0.0;
    std::size_t m = 0;
    for (std::size_t t = 0; t < row.index.size(); ++t) {
      const std::size_t col = row.index[t];
      if (col < model.num_eta) {
        v -= row.value[t] * eta[col];
      } else {
        m = col - model.tau_offset;
      }
    }
    tau[m] = std::min(tau[m], v);
  }
  double s = 0.0;
  for (double t : tau) s += t;
  return s;
}

/// Solves the relaxation with some eta fixed (-1 free, 0, 1). Fixing an
/// entry to 1 fixes the rest of its block to 0.
inline LpSolution solve_lp(const MilpModel& model, std::span<const std::int8_t> fixings, const LpOptions& options = {}) {
  DualSimplex engine(model.lp);
  std::vector<double> lo = model.lp.lower, hi = model.lp.upper;
  const auto& cat = model.catalog;
  for (std::size_t i = 0; i < cat.num_vars(); ++i) {
    bool one = false;
    for (std::size_t k = 0; k < cat.num_sets(i); ++k) one |= !fixings.empty() && fixings[cat.flat(i, k)] == 1;
    for (std::size_t k = 0; k < cat.num_sets(i); ++k) {
      const std::size_t p = cat.flat(i, k);
      const int f = fixings.empty() ? -1 : fixings[p];
      if (f == 1) {
        lo[p] = hi[p] = 1.0;
      } else if (f == 0 || one) {
        lo[p] = hi[p] = 0.0;
      }
    }
  }
  return engine.solve(lo, hi, options);
}

/// Primal heuristic: per variable take the largest eta entry; if the graph
/// has a cycle, revisit variables by decreasing confidence and demote to the
/// empty set any selection that would close a cycle with those accepted so
/// far. Always returns a DAG when the LP solution is usable.
inline std::optional<Structure> round_incumbent(const LpSolution& lp, const ParentSetCatalog& catalog) {
  if (lp.status != LpStatus::optimal || lp.x.size() < catalog.size()) return std::nullopt;
  const std::size_t n = catalog.num_vars();
  std::vector<std::size_t> pick(n, 0);
  std::vector<double> confidence(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -1.0;
    for (std::size_t k = 0; k < catalog.num_sets(i); ++k) {
      const double v = lp.x[catalog.flat(i, k)];
      if (v > best + 1e-12) {
        best = v;
        pick[i] = k;
      }
    }
    confidence[i] = best;
  }
  Structure s = Structure::from_selection(catalog, pick);
  if (s.is_acyclic()) return s;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return confidence[a] > confidence[b]; });
  std::vector<std::size_t> accepted(n, 0);
  for (std::size_t i : order) {
    accepted[i] = pick[i];
    if (!Structure::from_selection(catalog, accepted).is_acyclic()) accepted[i] = 0;
  }
  return Structure::from_selection(catalog, accepted);
}

namespace detail {

struct BbNode {
  std::vector<std::int8_t> fix;
  double bound = std::numeric_limits<double>::infinity();
  std::size_t depth = 0;
  std::uint64_t seq = 0;
  std::shared_ptr<const LpBasis> basis;
};

struct BestFirst {
  bool operator()(const BbNode& a, const BbNode& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.seq > b.seq;
  }
};

class OpenPool {
 public:
  explicit OpenPool(NodeOrder order) : order_(order) {}
  bool empty() const { return nodes_.empty(); }
  std::size_t size() const { return nodes_.size(); }

  void push(BbNode n) {
    nodes_.push_back(std::move(n));
    if (order_ == NodeOrder::best_first) std::push_heap(nodes_.begin(), nodes_.end(), BestFirst{});
  }
  BbNode pop() {
    if (order_ == NodeOrder::best_first) std::pop_heap(nodes_.begin(), nodes_.end(), BestFirst{});
    BbNode n = std::move(nodes_.back());
    nodes_.pop_back();
    return n;
  }
  double max_bound() const {
    if (nodes_.empty()) return -std::numeric_limits<double>::infinity();
    if (order_ == NodeOrder::best_first) return nodes_.front().bound;
    double b = -std::numeric_limits<double>::infinity();
    for (const auto& n : nodes_) b = std::max(b, n.bound);
    return b;
  }

 private:
  NodeOrder order_;
  std::vector<BbNode> nodes_;
};

}  // namespace detail

/// Branch-and-bound on the selection variables.
///
/// Nodes are pruned when infeasible or when their LP bound cannot beat the
/// incumbent by more than 1e-9 max(1, |z|). Every node LP solution is
/// rounded into a DAG and scored exactly, so the incumbent improves any
/// time. On time-out the best open bound gives zbar.
inline SolveResult branch_and_bound(const MilpModel& model, const SolverConfig& config = {}) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const auto deadline = start + std::chrono::duration_cast<clock::duration>(
                                    std::chrono::duration<double>(std::max(0.0, config.time_limit)));
  const auto& cat = model.catalog;
  const std::size_t num_eta = model.num_eta;
  const double inf = std::numeric_limits<double>::infinity();

  struct Shared {
    std::mutex mu;
    std::condition_variable cv;
    detail::OpenPool open;
    std::size_t active = 0;
    bool stop = false;
    bool timed_out = false;
    std::uint64_t seq = 0;
    double z = -std::numeric_limits<double>::infinity();
    std::optional<Structure> incumbent;
    double zbar_cap = std::numeric_limits<double>::infinity();
    double interrupted_bound = -std::numeric_limits<double>::infinity();
    SolveResult result;
    clock::time_point last_log;
    explicit Shared(NodeOrder o) : open(o) {}
  } shared(config.node_order);

  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - start).count(); };
  auto tol_of = [](double z) { return 1e-9 * std::max(1.0, std::abs(z)); };
  auto has_inc = [&] { return shared.incumbent.has_value(); };

  // Caller holds the lock.
  auto current_zbar = [&](double in_flight) {
    double b = std::max(shared.open.max_bound(), in_flight);
    b = std::max(b, shared.interrupted_bound);
    if (has_inc()) b = std::max(b, shared.z);
    b = std::min(b, shared.zbar_cap);
    shared.zbar_cap = b;
    return b;
  };

  auto log_line = [&](std::size_t nodes, double zbar) {
    if (!config.log) return;
    std::ostringstream os;
    os << "node=" << nodes << " z=" << shared.z << " zbar=" << zbar
       << " gap=" << std::fixed << std::setprecision(2) << gap_percent(shared.z, zbar, has_inc()) << "% open="
       << shared.open.size() << " t=" << std::setprecision(1) << elapsed() << '\n';
    *config.log << os.str() << std::flush;
  };

  auto offer = [&](const Structure& s, double bound_hint) {
    // Caller holds the lock.
    const std::vector<double> eta = s.eta(cat);
    const double score = model_score(model, eta);
    if (!has_inc() || score > shared.z) {
      shared.z = score;
      shared.incumbent = s;
      shared.result.trace.push_back({shared.result.nodes_explored, score, current_zbar(bound_hint), elapsed()});
    }
  };

  {
    detail::BbNode root;
    root.fix.assign(num_eta, -1);
    root.seq = shared.seq++;
    shared.open.push(std::move(root));
    shared.last_log = clock::now();
  }

  auto worker = [&]() {
    DualSimplex engine(model.lp);
    std::vector<double> lo(model.lp.lower), hi(model.lp.upper);
    for (;;) {
      detail::BbNode node;
      double cutoff;
      bool have_cutoff;
      {
        std::unique_lock lock(shared.mu);
        shared.cv.wait(lock, [&] { return shared.stop || !shared.open.empty() || shared.active == 0; });
        if (shared.stop || (shared.open.empty() && shared.active == 0)) {
          shared.cv.notify_all();
          return;
        }
        if (clock::now() >= deadline) {
          shared.timed_out = true;
          shared.stop = true;
          shared.cv.notify_all();
          return;
        }
        if (config.max_nodes && shared.result.nodes_explored >= config.max_nodes) {
          shared.timed_out = true;
          shared.stop = true;
          shared.cv.notify_all();
          return;
        }
        if (config.node_order == NodeOrder::best_first && has_inc()) {
          // Early stop at the requested gap.
          const double zbar = current_zbar(-inf);
          if (shared.active == 0 && gap_percent(shared.z, zbar, true) <= config.gap_tol) {
            shared.stop = true;
            shared.cv.notify_all();
            return;
          }
        }
        node = shared.open.pop();
        ++shared.active;
        have_cutoff = has_inc();
        cutoff = shared.z + tol_of(shared.z);
        if (have_cutoff && node.bound <= cutoff) {
          --shared.active;
          shared.cv.notify_all();
          continue;
        }
      }

      // Bounds, with a fix-to-one zeroing the rest of its block.
      std::copy(model.lp.lower.begin(), model.lp.lower.end(), lo.begin());
      std::copy(model.lp.upper.begin(), model.lp.upper.end(), hi.begin());
      for (std::size_t i = 0; i < cat.num_vars(); ++i) {
        bool one = false;
        for (std::size_t k = 0; k < cat.num_sets(i); ++k) one |= node.fix[cat.flat(i, k)] == 1;
        for (std::size_t k = 0; k < cat.num_sets(i); ++k) {
          const std::size_t p = cat.flat(i, k);
          if (node.fix[p] == 1) {
            lo[p] = hi[p] = 1.0;
          } else if (node.fix[p] == 0 || one) {
            lo[p] = hi[p] = 0.0;
          }
        }
      }

      LpOptions opt;
      opt.deadline = deadline;
      if (have_cutoff) opt.cutoff = cutoff;
      if (config.warm_start && node.basis) opt.warm_start = node.basis.get();
      LpSolution sol = engine.solve(lo, hi, opt);

      std::unique_lock lock(shared.mu);
      --shared.active;
      if (sol.status == LpStatus::time_limit) {
        shared.interrupted_bound = std::max(shared.interrupted_bound, node.bound);
        shared.timed_out = true;
        shared.stop = true;
        shared.cv.notify_all();
        return;
      }
      ++shared.result.nodes_explored;
      if (node.depth == 0 && sol.status == LpStatus::optimal) shared.result.root_bound = sol.objective;

      if (sol.status == LpStatus::optimal) {
        if (std::isfinite(node.bound)) {
          shared.result.max_bound_excess = std::max(shared.result.max_bound_excess, sol.objective - node.bound);
        }
        const double bound = std::min(sol.objective, node.bound);

        bool integral = true;
        std::size_t branch_pos = num_eta;
        double best_frac = -1.0;
        for (std::size_t p = 0; p < num_eta; ++p) {
          const double v = sol.x[p];
          const double frac = std::min(v, 1.0 - v);
          if (frac > config.integrality_tol) {
            integral = false;
            if (config.branch_rule == BranchRule::first_fractional) {
              if (branch_pos == num_eta) branch_pos = p;
            } else if (frac > best_frac + 1e-12) {
              best_frac = frac;
              branch_pos = p;
            }
          }
        }

        if (auto rounded = round_incumbent(sol, cat)) offer(*rounded, bound);

        const bool prunable = has_inc() && bound <= shared.z + tol_of(shared.z);
        if (!integral && !prunable) {
          detail::BbNode one, zero;
          one.fix = node.fix;
          one.fix[branch_pos] = 1;
          zero.fix = std::move(node.fix);
          zero.fix[branch_pos] = 0;
          one.bound = zero.bound = bound;
          one.depth = zero.depth = node.depth + 1;
          one.basis = zero.basis = sol.basis;
          if (config.node_order == NodeOrder::best_first) {
            one.seq = shared.seq++;
            zero.seq = shared.seq++;
            shared.open.push(std::move(one));
            shared.open.push(std::move(zero));
          } else {
            zero.seq = shared.seq++;
            one.seq = shared.seq++;
            shared.open.push(std::move(zero));
            shared.open.push(std::move(one));
          }
        }
      }

      if (config.log && std::chrono::duration<double>(clock::now() - shared.last_log).count() >= config.log_interval) {
        shared.last_log = clock::now();
        log_line(shared.result.nodes_explored, current_zbar(-inf));
      }
      shared.cv.notify_all();
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, config.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SolveResult result = std::move(shared.result);
  result.incumbent = shared.incumbent;
  result.objective = shared.z;
  result.wall_time = elapsed();
  const bool finished = !shared.timed_out;
  if (finished) {
    result.upper_bound = has_inc() ? shared.z : -inf;
    if (has_inc() && !shared.open.empty()) {
      // Stopped at the gap tolerance.
      result.upper_bound = std::max(shared.z, std::min(shared.open.max_bound(), shared.zbar_cap));
    }
    result.status = has_inc() ? SolveStatus::optimal : SolveStatus::infeasible;
  } else {
    double zbar = std::max(shared.open.max_bound(), shared.interrupted_bound);
    if (has_inc()) zbar = std::max(zbar, shared.z);
    result.upper_bound = std::min(zbar, shared.zbar_cap);
    if (has_inc()) result.upper_bound = std::max(result.upper_bound, shared.z);
    result.status = has_inc() ? SolveStatus::feasible_timeout : SolveStatus::no_incumbent;
  }
  result.gap_percent = gap_percent(result.objective, result.upper_bound, has_inc());
  log_line(result.nodes_explored, result.upper_bound);
  return result;
}

}  // namespace mmbn
