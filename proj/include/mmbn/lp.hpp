#pragma once

// Dense bounded-variable dual simplex.
//
// Every structural column must have finite lower and upper bounds. With that
// restriction the all-slack basis, with each structural parked at the bound
// its cost favours, is always dual feasible, so no phase one is needed, and
// tightening bounds (branching) keeps any previous basis dual feasible.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmbn {

enum class RowSense { le, ge, eq };

struct SparseRow {
  std::vector<std::size_t> index;
  std::vector<double> value;
  RowSense sense = RowSense::le;
  double rhs = 0.0;
  std::string name;
};

/// max (or min) c.x  s.t.  rows, lower <= x <= upper.
struct LinearProgram {
  bool maximize = true;
  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<SparseRow> rows;
  std::vector<std::string> column_names;
  std::vector<bool> integer;

  std::size_t num_cols() const noexcept { return objective.size(); }
  std::size_t num_rows() const noexcept { return rows.size(); }

  std::size_t add_column(std::string name, double cost, double lo, double hi, bool is_integer) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    column_names.push_back(std::move(name));
    integer.push_back(is_integer);
    return objective.size() - 1;
  }

  double row_activity(std::size_t r, std::span<const double> x) const {
    double a = 0.0;
    for (std::size_t t = 0; t < rows[r].index.size(); ++t) a += rows[r].value[t] * x[rows[r].index[t]];
    return a;
  }

  /// Largest absolute violation of rows and bounds.
  double max_violation(std::span<const double> x) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < num_cols(); ++j) {
      worst = std::max({worst, lower[j] - x[j], x[j] - upper[j]});
    }
    for (std::size_t r = 0; r < num_rows(); ++r) {
      const double a = row_activity(r, x);
      const double rhs = rows[r].rhs;
      switch (rows[r].sense) {
        case RowSense::le: worst = std::max(worst, a - rhs); break;
        case RowSense::ge: worst = std::max(worst, rhs - a); break;
        case RowSense::eq: worst = std::max(worst, std::abs(a - rhs)); break;
      }
    }
    return worst;
  }
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LpStatus { optimal, infeasible, cutoff, time_limit };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::cutoff: return "cutoff";
    case LpStatus::time_limit: return "time_limit";
  }
  return "?";
}

/// Basis snapshot: basic column per row (columns n.. are row slacks) and
/// which nonbasic columns sit at their upper bound.
struct LpBasis {
  std::vector<std::size_t> basic;
  std::vector<std::uint8_t> at_upper;
  std::uint64_t serial = 0;  // identifies the engine state it was taken from
};

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  std::vector<double> x;
  double objective = 0.0;
  std::shared_ptr<const LpBasis> basis;
  std::size_t iterations = 0;
};

struct LpOptions {
  /// Stop with `cutoff` once the bound proves the optimum cannot exceed
  /// this value (objective sense of the program).
  std::optional<double> cutoff;
  std::optional<std::chrono::steady_clock::time_point> deadline;
  const LpBasis* warm_start = nullptr;
};

class DualSimplex {
 public:
  explicit DualSimplex(const LinearProgram& lp)
      : m_(lp.num_rows()), n_(lp.num_cols()), nt_(lp.num_cols() + lp.num_rows()), lp_(&lp) {
    a_.assign(m_ * n_, 0.0);
    b_.resize(m_);
    for (std::size_t r = 0; r < m_; ++r) {
      const auto& row = lp.rows[r];
      for (std::size_t t = 0; t < row.index.size(); ++t) a_[r * n_ + row.index[t]] += row.value[t];
      b_[r] = row.rhs;
    }
    cost_.assign(nt_, 0.0);
    const double sign = lp.maximize ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n_; ++j) cost_[j] = sign * lp.objective[j];
    slack_lo_.resize(m_);
    slack_hi_.resize(m_);
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < m_; ++r) {
      switch (lp.rows[r].sense) {
        case RowSense::le: slack_lo_[r] = 0.0; slack_hi_[r] = inf; break;
        case RowSense::ge: slack_lo_[r] = -inf; slack_hi_[r] = 0.0; break;
        case RowSense::eq: slack_lo_[r] = 0.0; slack_hi_[r] = 0.0; break;
      }
    }
  }

  std::size_t num_rows() const noexcept { return m_; }
  std::size_t num_cols() const noexcept { return n_; }

  /// Solves with the given column bounds (defaults to the program's).
  LpSolution solve(std::span<const double> lower, std::span<const double> upper, const LpOptions& opt = {}) {
    if (lower.size() != n_ || upper.size() != n_) throw std::invalid_argument("lp: bound size mismatch");
    lo_.resize(nt_);
    hi_.resize(nt_);
    for (std::size_t j = 0; j < n_; ++j) {
      if (!std::isfinite(lower[j]) || !std::isfinite(upper[j])) {
        throw std::invalid_argument("lp: structural columns need finite bounds");
      }
      if (lower[j] > upper[j] + kPrimalTol) {
        LpSolution s;
        s.status = LpStatus::infeasible;
        return s;
      }
      lo_[j] = lower[j];
      hi_[j] = std::max(lower[j], upper[j]);
    }
    for (std::size_t r = 0; r < m_; ++r) {
      lo_[n_ + r] = slack_lo_[r];
      hi_[n_ + r] = slack_hi_[r];
    }

    bool loaded = false;
    if (opt.warm_start && opt.warm_start->basic.size() == m_ && opt.warm_start->at_upper.size() == nt_) {
      // The tableau still holds this basis: only the bounds moved.
      if (opt.warm_start->serial != 0 && opt.warm_start->serial == last_serial_) loaded = rebound();
      if (!loaded && !tab_.empty() && pivots_since_factor_ < kRefactorPivots) loaded = walk_to(*opt.warm_start);
      if (!loaded) loaded = load_basis(*opt.warm_start);
    }
    if (!loaded) load_slack_basis();

    for (int attempt = 0;; ++attempt) {
      LpSolution sol = iterate(opt);
      if (sol.status != LpStatus::optimal) return sol;
      const double viol = lp_->max_violation(sol.x);
      if (viol <= kAcceptTol) return sol;
      if (attempt >= 2) {
        throw NumericalError("lp: optimal basis violates constraints by " + std::to_string(viol));
      }
      // Rebuild the tableau from the current basis and keep going.
      if (!load_basis(snapshot())) load_slack_basis();
    }
  }

  LpSolution solve(const LpOptions& opt = {}) { return solve(lp_->lower, lp_->upper, opt); }

 private:
  static constexpr double kPrimalTol = 1e-9;
  static constexpr double kDualTol = 1e-9;
  static constexpr double kPivotTol = 1e-9;
  static constexpr double kAcceptTol = 1e-7;
  // Pivots applied to a tableau before it is rebuilt from the original rows.
  static constexpr std::size_t kRefactorPivots = 5000;

  double& t(std::size_t r, std::size_t j) { return tab_[r * nt_ + j]; }
  double t(std::size_t r, std::size_t j) const { return tab_[r * nt_ + j]; }

  bool is_fixed(std::size_t j) const { return lo_[j] == hi_[j]; }

  void park_nonbasic(std::size_t j) { x_[j] = at_upper_[j] ? hi_[j] : lo_[j]; }

  void load_slack_basis() {
    tab_.assign(m_ * nt_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) {
      std::copy(a_.begin() + static_cast<std::ptrdiff_t>(r * n_),
                a_.begin() + static_cast<std::ptrdiff_t>((r + 1) * n_),
                tab_.begin() + static_cast<std::ptrdiff_t>(r * nt_));
      t(r, n_ + r) = 1.0;
    }
    basis_.resize(m_);
    pos_.assign(nt_, kNonbasic);
    for (std::size_t r = 0; r < m_; ++r) {
      basis_[r] = n_ + r;
      pos_[n_ + r] = r;
    }
    pivots_since_factor_ = 0;
    d_ = cost_;
    at_upper_.assign(nt_, 0);
    x_.assign(nt_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      at_upper_[j] = d_[j] < 0.0 ? 1 : 0;
      park_nonbasic(j);
    }
    recompute_basic_values();
  }

  // Inverts the basis matrix and rebuilds the tableau. Returns false when the
  // basis is singular or cannot be made dual feasible.
  bool load_basis(const LpBasis& basis) {
    const std::size_t m = m_;
    std::vector<double> bmat(m * m, 0.0);
    std::vector<std::size_t> pos(nt_, kNonbasic);
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t q = basis.basic[r];
      if (q >= nt_ || pos[q] != kNonbasic) return false;
      pos[q] = r;
      if (q < n_) {
        for (std::size_t i = 0; i < m; ++i) bmat[i * m + r] = a_[i * n_ + q];
      } else {
        bmat[(q - n_) * m + r] = 1.0;
      }
    }
    // Gauss-Jordan with partial pivoting: inv = B^{-1}.
    std::vector<double> inv(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) inv[i * m + i] = 1.0;
    for (std::size_t col = 0; col < m; ++col) {
      std::size_t piv = col;
      double best = std::abs(bmat[col * m + col]);
      for (std::size_t i = col + 1; i < m; ++i) {
        if (std::abs(bmat[i * m + col]) > best) {
          best = std::abs(bmat[i * m + col]);
          piv = i;
        }
      }
      if (best < 1e-11) return false;
      if (piv != col) {
        for (std::size_t j = 0; j < m; ++j) {
          std::swap(bmat[piv * m + j], bmat[col * m + j]);
          std::swap(inv[piv * m + j], inv[col * m + j]);
        }
      }
      const double scale = 1.0 / bmat[col * m + col];
      for (std::size_t j = 0; j < m; ++j) {
        bmat[col * m + j] *= scale;
        inv[col * m + j] *= scale;
      }
      for (std::size_t i = 0; i < m; ++i) {
        if (i == col) continue;
        const double f = bmat[i * m + col];
        if (f == 0.0) continue;
        for (std::size_t j = 0; j < m; ++j) {
          bmat[i * m + j] -= f * bmat[col * m + j];
          inv[i * m + j] -= f * inv[col * m + j];
        }
      }
    }
    tab_.assign(m * nt_, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      double* out = &tab_[r * nt_];
      const double* irow = &inv[r * m];
      for (std::size_t i = 0; i < m; ++i) {
        const double f = irow[i];
        if (f == 0.0) continue;
        const double* arow = &a_[i * n_];
        for (std::size_t j = 0; j < n_; ++j) out[j] += f * arow[j];
        out[n_ + i] = f;
      }
    }
    basis_ = basis.basic;
    pos_ = std::move(pos);
    pivots_since_factor_ = 0;
    return settle(basis);
  }

  // Moves the current tableau to `basis` by pivoting in the missing columns.
  // Cheap when the two bases are close; false if a pivot is too small or the
  // bases are far apart, in which case the caller refactors.
  bool walk_to(const LpBasis& basis) {
    std::vector<std::uint8_t> target(nt_, 0);
    for (std::size_t q : basis.basic) {
      if (q >= nt_ || target[q]) return false;
      target[q] = 1;
    }
    std::vector<std::size_t> entering;
    for (std::size_t q : basis.basic) {
      if (pos_[q] == kNonbasic) entering.push_back(q);
    }
    if (entering.size() > m_ / 4 + 1) return false;
    for (std::size_t q : entering) {
      std::size_t p = m_;
      double best = 1e-7;
      for (std::size_t r = 0; r < m_; ++r) {
        if (target[basis_[r]]) continue;
        const double v = std::abs(t(r, q));
        if (v > best) {
          best = v;
          p = r;
        }
      }
      if (p == m_) return false;
      pivot(p, q);
    }
    return settle(basis);
  }

  // Shared tail of basis loading: nonbasic columns at the requested bounds,
  // corrected to dual feasibility, then primal values.
  bool settle(const LpBasis& basis) {
    at_upper_ = basis.at_upper;
    x_.assign(nt_, 0.0);
    recompute_reduced_costs();
    for (std::size_t j = 0; j < nt_; ++j) {
      if (pos_[j] != kNonbasic) continue;
      if (!fix_dual_sign(j)) return false;
      park_nonbasic(j);
    }
    recompute_basic_values();
    return true;
  }

  // Plain tableau pivot on (p, q); updates the basis bookkeeping only.
  void pivot(std::size_t p, std::size_t q) {
    std::vector<std::size_t> nz;
    for (std::size_t j = 0; j < nt_; ++j) {
      if (t(p, j) != 0.0) nz.push_back(j);
    }
    const double inv = 1.0 / t(p, q);
    for (std::size_t j : nz) t(p, j) *= inv;
    const double* src = &tab_[p * nt_];
    for (std::size_t r = 0; r < m_; ++r) {
      if (r == p) continue;
      const double f = t(r, q);
      if (f == 0.0) continue;
      double* dst = &tab_[r * nt_];
      for (std::size_t j : nz) dst[j] -= f * src[j];
      dst[q] = 0.0;
    }
    t(p, q) = 1.0;
    pos_[basis_[p]] = kNonbasic;
    basis_[p] = q;
    pos_[q] = p;
    ++pivots_since_factor_;
  }

  // Puts nonbasic j at the bound matching its reduced cost sign. False if
  // the required bound is infinite and the violation exceeds tolerance.
  bool fix_dual_sign(std::size_t j) {
    if (is_fixed(j)) {
      at_upper_[j] = 0;
      return true;
    }
    const bool want_upper = d_[j] < -kDualTol;
    const bool want_lower = d_[j] > kDualTol;
    if (want_upper) {
      if (!std::isfinite(hi_[j])) return false;
      at_upper_[j] = 1;
    } else if (want_lower) {
      if (!std::isfinite(lo_[j])) return false;
      at_upper_[j] = 0;
    } else if (at_upper_[j] ? !std::isfinite(hi_[j]) : !std::isfinite(lo_[j])) {
      at_upper_[j] = at_upper_[j] ? 0 : 1;
    }
    return true;
  }

  // x_B = B^{-1} (b - N x_N), with B^{-1} read from the slack columns.
  void recompute_basic_values() {
    std::vector<double> rhs = b_;
    for (std::size_t j = 0; j < nt_; ++j) {
      if (pos_[j] != kNonbasic || x_[j] == 0.0) continue;
      if (j < n_) {
        for (std::size_t i = 0; i < m_; ++i) rhs[i] -= a_[i * n_ + j] * x_[j];
      } else {
        rhs[j - n_] -= x_[j];
      }
    }
    for (std::size_t r = 0; r < m_; ++r) {
      double v = 0.0;
      const double* binv = &tab_[r * nt_ + n_];
      for (std::size_t i = 0; i < m_; ++i) v += binv[i] * rhs[i];
      x_[basis_[r]] = v;
    }
  }

  void recompute_reduced_costs() {
    std::vector<double> y(m_, 0.0);  // y = c_B^T B^{-1}
    for (std::size_t r = 0; r < m_; ++r) {
      const double cb = cost_[basis_[r]];
      if (cb == 0.0) continue;
      const double* binv = &tab_[r * nt_ + n_];
      for (std::size_t i = 0; i < m_; ++i) y[i] += cb * binv[i];
    }
    d_.assign(nt_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      double s = cost_[j];
      for (std::size_t i = 0; i < m_; ++i) s -= y[i] * a_[i * n_ + j];
      d_[j] = s;
    }
    for (std::size_t i = 0; i < m_; ++i) d_[n_ + i] = -y[i];
    for (std::size_t r = 0; r < m_; ++r) d_[basis_[r]] = 0.0;
  }

  double objective_value() const {
    double s = 0.0;
    for (std::size_t j = 0; j < n_; ++j) s += lp_->objective[j] * x_[j];
    return s;
  }

  LpBasis snapshot() const { return LpBasis{basis_, at_upper_, 0}; }

  bool rebound() {
    for (std::size_t j = 0; j < nt_; ++j) {
      if (pos_[j] != kNonbasic) continue;
      if (!fix_dual_sign(j)) return false;
      park_nonbasic(j);
    }
    recompute_basic_values();
    return true;
  }

  static std::uint64_t next_serial() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
  }

  LpSolution finish(LpStatus status, std::size_t iterations) {
    LpSolution s;
    s.status = status;
    s.iterations = iterations;
    s.x.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
    if (status == LpStatus::optimal) {
      for (std::size_t j = 0; j < n_; ++j) s.x[j] = std::clamp(s.x[j], lo_[j], hi_[j]);
    }
    s.objective = 0.0;
    for (std::size_t j = 0; j < n_; ++j) s.objective += lp_->objective[j] * s.x[j];
    LpBasis b = snapshot();
    b.serial = next_serial();
    last_serial_ = b.serial;
    s.basis = std::make_shared<const LpBasis>(std::move(b));
    return s;
  }

  LpSolution iterate(const LpOptions& opt) {
    const std::size_t max_iter = 50000 + 50 * (m_ + n_);
    std::vector<std::size_t> row_nz;
    row_nz.reserve(nt_);
    std::vector<double> col_q(m_);
    const double sense = lp_->maximize ? 1.0 : -1.0;

    for (std::size_t iter = 0;; ++iter) {
      if (iter > max_iter) throw NumericalError("lp: iteration limit exceeded");
      if (iter % 100 == 99) {
        recompute_reduced_costs();
        for (std::size_t j = 0; j < nt_; ++j) {
          if (pos_[j] == kNonbasic && !is_fixed(j) && std::isfinite(lo_[j]) && std::isfinite(hi_[j])) {
            fix_dual_sign(j);
            park_nonbasic(j);
          }
        }
        recompute_basic_values();
      }
      if (opt.deadline && iter % 32 == 31 && std::chrono::steady_clock::now() >= *opt.deadline) {
        return finish(LpStatus::time_limit, iter);
      }
      if (opt.cutoff && iter % 8 == 0) {
        // A dual feasible basis bounds the optimum.
        if (sense * objective_value() <= sense * *opt.cutoff) return finish(LpStatus::cutoff, iter);
      }

      // Leaving row: largest bound violation.
      std::size_t p = m_;
      double worst = kPrimalTol;
      for (std::size_t r = 0; r < m_; ++r) {
        const std::size_t j = basis_[r];
        const double v = std::max(lo_[j] - x_[j], x_[j] - hi_[j]);
        if (v > worst) {
          worst = v;
          p = r;
        }
      }
      if (p == m_) {
        if (opt.cutoff && sense * objective_value() <= sense * *opt.cutoff) return finish(LpStatus::cutoff, iter);
        return finish(LpStatus::optimal, iter);
      }

      const std::size_t leaving = basis_[p];
      const bool below = x_[leaving] < lo_[leaving];
      const double target = below ? lo_[leaving] : hi_[leaving];
      // below: x_Bp must rise; candidate j moves by t with dx_Bp = -alpha t.
      const double dir = below ? 1.0 : -1.0;

      row_nz.clear();
      for (std::size_t j = 0; j < nt_; ++j) {
        if (t(p, j) != 0.0) row_nz.push_back(j);
      }

      // Harris two-pass ratio test.
      double bound = std::numeric_limits<double>::infinity();
      for (std::size_t j : row_nz) {
        if (pos_[j] != kNonbasic || is_fixed(j)) continue;
        const double alpha = t(p, j) * dir;
        if (std::abs(alpha) < kPivotTol) continue;
        // at lower -> may increase -> need alpha < 0; at upper -> need alpha > 0
        if (at_upper_[j] ? alpha <= 0.0 : alpha >= 0.0) continue;
        const double ratio = (std::abs(d_[j]) + kDualTol) / std::abs(alpha);
        bound = std::min(bound, ratio);
      }
      if (!std::isfinite(bound)) return finish(LpStatus::infeasible, iter);
      std::size_t q = nt_;
      double best_alpha = 0.0;
      for (std::size_t j : row_nz) {
        if (pos_[j] != kNonbasic || is_fixed(j)) continue;
        const double alpha = t(p, j) * dir;
        if (std::abs(alpha) < kPivotTol) continue;
        if (at_upper_[j] ? alpha <= 0.0 : alpha >= 0.0) continue;
        if (std::abs(d_[j]) / std::abs(alpha) <= bound && std::abs(alpha) > best_alpha) {
          best_alpha = std::abs(alpha);
          q = j;
        }
      }
      if (q == nt_) return finish(LpStatus::infeasible, iter);

      const double apq = t(p, q);
      // Primal step.
      const double step = (x_[leaving] - target) / apq;
      for (std::size_t r = 0; r < m_; ++r) col_q[r] = t(r, q);
      for (std::size_t r = 0; r < m_; ++r) {
        if (col_q[r] != 0.0) x_[basis_[r]] -= col_q[r] * step;
      }
      x_[q] += step;
      x_[leaving] = target;

      // Dual step.
      const double ratio = d_[q] / apq;
      for (std::size_t j : row_nz) d_[j] -= ratio * t(p, j);
      d_[q] = 0.0;

      // Tableau pivot.
      const double inv = 1.0 / apq;
      for (std::size_t j : row_nz) t(p, j) *= inv;
      for (std::size_t r = 0; r < m_; ++r) {
        if (r == p) continue;
        const double f = col_q[r];
        if (f == 0.0) continue;
        double* dst = &tab_[r * nt_];
        const double* src = &tab_[p * nt_];
        for (std::size_t j : row_nz) dst[j] -= f * src[j];
        dst[q] = 0.0;
      }
      t(p, q) = 1.0;

      pos_[leaving] = kNonbasic;
      at_upper_[leaving] = below ? 0 : 1;
      if (is_fixed(leaving)) at_upper_[leaving] = 0;
      basis_[p] = q;
      pos_[q] = p;
      at_upper_[q] = 0;
      ++pivots_since_factor_;
    }
  }

  static constexpr std::size_t kNonbasic = std::numeric_limits<std::size_t>::max();

  std::size_t m_, n_, nt_;
  const LinearProgram* lp_;
  std::vector<double> a_;
  std::vector<double> b_;
  std::vector<double> cost_;
  std::vector<double> slack_lo_, slack_hi_;

  std::vector<double> lo_, hi_;
  std::vector<double> tab_;
  std::vector<std::size_t> basis_;
  std::vector<std::size_t> pos_;
  std::vector<std::uint8_t> at_upper_;
  std::vector<double> x_;
  std::vector<double> d_;
  std::uint64_t last_serial_ = 0;
  std::size_t pivots_since_factor_ = 0;
};

}  // namespace mmbn
