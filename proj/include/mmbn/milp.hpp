#pragma once

// Mixed-integer program for structure learning: selection variables eta,
// hinge variables tau (margin scores only) and continuous order variables o
// whose pairwise rows certify a topological ordering.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmbn/catalog.hpp"
#include "mmbn/coefficients.hpp"
#include "mmbn/lp.hpp"

namespace mmbn {

struct MilpModel {
  LinearProgram lp;
  ScoreKind kind = ScoreKind::sm;
  ParentSetCatalog catalog;
  double delta = 1.0;
  double gamma = 0.0;
  std::size_t num_samples = 0;

  std::size_t num_eta = 0;
  std::size_t tau_offset = 0;
  std::size_t num_tau = 0;
  std::size_t order_offset = 0;

  std::size_t num_margin_rows = 0;
  std::size_t num_selection_rows = 0;
  std::size_t num_order_rows = 0;

  std::size_t num_vars() const { return catalog.num_vars(); }
  std::size_t eta_col(std::size_t pos) const { return pos; }
  std::size_t tau_col(std::size_t m) const { return tau_offset + m; }
  std::size_t order_col(std::size_t i) const { return order_offset + i; }
};

/// Assembles the program for a coefficient bank. Row families, in order:
/// margin rows (sm: one per sample and competing class; sbm: one per
/// sample; mdl: none), one selection row per variable, and one order row
/// per ordered pair (i, j), i != j:
///
///   -2 delta * sum_{k: i in S_jk} eta_jk + o_j - o_i >= delta/N - 2 delta
inline MilpModel build_milp(const CoefficientBank& bank, const ParentSetCatalog& catalog, double delta = 1.0) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("build_milp: delta must be > 0");
  if (bank.offsets() != catalog.offsets()) throw std::invalid_argument("build_milp: bank/catalog mismatch");
  MilpModel model;
  model.kind = bank.kind();
  model.catalog = catalog;
  model.delta = delta;
  model.gamma = bank.gamma();
  model.num_samples = bank.num_samples();
  LinearProgram& lp = model.lp;
  lp.maximize = true;

  const std::size_t n = catalog.num_vars();
  const bool margin = bank.kind() != ScoreKind::mdl;

  model.num_eta = catalog.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < catalog.num_sets(i); ++k) {
      const double cost = margin ? 0.0 : bank.omega()[catalog.flat(i, k)];
      lp.add_column("eta_" + std::to_string(i) + "_" + std::to_string(k), cost, 0.0, 1.0, true);
    }
  }

  model.tau_offset = lp.num_cols();
  if (margin) {
    // Lower bound: below every attainable margin row value, never binding.
    double floor = bank.gamma();
    for (std::size_t r = 0; r < bank.num_rows(); ++r) {
      double neg = 0.0;
      for (double a : bank.row(r)) neg += std::min(a, 0.0);
      floor = std::min(floor, neg);
    }
    floor -= 1.0;
    model.num_tau = bank.num_samples();
    for (std::size_t m = 0; m < model.num_tau; ++m) {
      lp.add_column("tau_" + std::to_string(m), 1.0, floor, bank.gamma(), false);
    }
  }

  model.order_offset = lp.num_cols();
  for (std::size_t i = 0; i < n; ++i) lp.add_column("o_" + std::to_string(i), 0.0, 0.0, delta, false);

  if (margin) {
    for (std::size_t r = 0; r < bank.num_rows(); ++r) {
      SparseRow row;
      const std::size_t m = bank.row_sample(r);
      row.name = bank.kind() == ScoreKind::sm
                     ? "margin_" + std::to_string(m) + "_" + std::to_string(bank.row_class(r))
                     : "margin_" + std::to_string(m);
      row.index.push_back(model.tau_col(m));
      row.value.push_back(1.0);
      auto coeffs = bank.row(r);
      for (std::size_t pos = 0; pos < coeffs.size(); ++pos) {
        if (coeffs[pos] == 0.0) continue;
        row.index.push_back(model.eta_col(pos));
        row.value.push_back(-coeffs[pos]);
      }
      row.sense = RowSense::le;
      row.rhs = 0.0;
      lp.rows.push_back(std::move(row));
    }
    model.num_margin_rows = bank.num_rows();
  }

  for (std::size_t i = 0; i < n; ++i) {
    SparseRow row;
    row.name = "select_" + std::to_string(i);
    for (std::size_t k = 0; k < catalog.num_sets(i); ++k) {
      row.index.push_back(model.eta_col(catalog.flat(i, k)));
      row.value.push_back(1.0);
    }
    row.sense = RowSense::eq;
    row.rhs = 1.0;
    lp.rows.push_back(std::move(row));
  }
  model.num_selection_rows = n;

  const double nd = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      SparseRow row;
      row.name = "order_" + std::to_string(i) + "_" + std::to_string(j);
      for (std::size_t k = 0; k < catalog.num_sets(j); ++k) {
        const ParentSet& s = catalog.set(j, k);
        if (std::binary_search(s.begin(), s.end(), static_cast<int>(i))) {
          row.index.push_back(model.eta_col(catalog.flat(j, k)));
          row.value.push_back(-2.0 * delta);
        }
      }
      row.index.push_back(model.order_col(j));
      row.value.push_back(1.0);
      row.index.push_back(model.order_col(i));
      row.value.push_back(-1.0);
      row.sense = RowSense::ge;
      row.rhs = delta / nd - 2.0 * delta;
      lp.rows.push_back(std::move(row));
    }
  }
  model.num_order_rows = n * (n - 1);
  return model;
}

/// True iff (eta, o) satisfies every order row and 0 <= o <= delta.
inline bool check_order_certificate(const ParentSetCatalog& catalog, std::span<const double> eta,
                                    std::span<const double> order, double delta, double tol = 1e-9) {
  const std::size_t n = catalog.num_vars();
  if (eta.size() != catalog.size() || order.size() != n) throw std::invalid_argument("certificate size mismatch");
  const double scale_tol = tol * std::max(1.0, delta);
  for (std::size_t i = 0; i < n; ++i) {
    if (order[i] < -scale_tol || order[i] > delta + scale_tol) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double a = 0.0;
      for (std::size_t k = 0; k < catalog.num_sets(j); ++k) {
        const ParentSet& s = catalog.set(j, k);
        if (std::binary_search(s.begin(), s.end(), static_cast<int>(i))) a += eta[catalog.flat(j, k)];
      }
      const double lhs = (1.0 - a) * 2.0 * delta + order[j] - order[i];
      if (lhs < delta / static_cast<double>(n) - scale_tol) return false;
    }
  }
  return true;
}

/// o_i = (position of i in a topological order) * delta / N; ties among
/// ready nodes go to the smaller variable index.
inline std::vector<double> certificate_from_dag(const Structure& structure, double delta) {
  auto order = structure.topological_order();
  if (!order) throw std::invalid_argument("certificate_from_dag: structure is cyclic");
  const double n = static_cast<double>(structure.num_vars());
  std::vector<double> o(structure.num_vars());
  for (std::size_t rank = 0; rank < order->size(); ++rank) {
    o[(*order)[rank]] = static_cast<double>(rank) * delta / n;
  }
  return o;
}

namespace detail {

inline std::string mps_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Free-format MPS with an OBJSENSE MAX section and MARKER/INTORG blocks
/// around the integer columns.
inline void write_mps(const MilpModel& model, std::ostream& out, const std::string& name = "MMBN") {
  const LinearProgram& lp = model.lp;
  out << "NAME " << name << '\n';
  out << "OBJSENSE\n    " << (lp.maximize ? "MAX" : "MIN") << '\n';
  out << "ROWS\n";
  out << " N  obj\n";
  for (const auto& row : lp.rows) {
    const char* s = row.sense == RowSense::le ? "L" : row.sense == RowSense::ge ? "G" : "E";
    out << " " << s << "  " << row.name << '\n';
  }

  // Column-major view of the rows.
  std::vector<std::vector<std::pair<std::size_t, double>>> cols(lp.num_cols());
  for (std::size_t r = 0; r < lp.num_rows(); ++r) {
    for (std::size_t t = 0; t < lp.rows[r].index.size(); ++t) {
      cols[lp.rows[r].index[t]].emplace_back(r, lp.rows[r].value[t]);
    }
  }

  out << "COLUMNS\n";
  bool in_int = false;
  int marker = 0;
  for (std::size_t j = 0; j < lp.num_cols(); ++j) {
    if (lp.integer[j] != in_int) {
      out << "    MARKER" << marker++ << "  'MARKER'  " << (lp.integer[j] ? "'INTORG'" : "'INTEND'") << '\n';
      in_int = lp.integer[j];
    }
    const std::string& cname = lp.column_names[j];
    if (lp.objective[j] != 0.0) out << "    " << cname << "  obj  " << detail::mps_number(lp.objective[j]) << '\n';
    for (auto [r, v] : cols[j]) out << "    " << cname << "  " << lp.rows[r].name << "  " << detail::mps_number(v) << '\n';
    if (lp.objective[j] == 0.0 && cols[j].empty()) out << "    " << cname << "  obj  0\n";
  }
  if (in_int) out << "    MARKER" << marker++ << "  'MARKER'  'INTEND'\n";

  out << "RHS\n";
  for (const auto& row : lp.rows) {
    if (row.rhs != 0.0) out << "    RHS  " << row.name << "  " << detail::mps_number(row.rhs) << '\n';
  }

  out << "BOUNDS\n";
  for (std::size_t j = 0; j < lp.num_cols(); ++j) {
    const std::string& cname = lp.column_names[j];
    if (lp.integer[j] && lp.lower[j] == 0.0 && lp.upper[j] == 1.0) {
      out << " BV BND  " << cname << '\n';
      continue;
    }
    if (lp.lower[j] == lp.upper[j]) {
      out << " FX BND  " << cname << "  " << detail::mps_number(lp.lower[j]) << '\n';
      continue;
    }
    if (lp.lower[j] != 0.0) out << " LO BND  " << cname << "  " << detail::mps_number(lp.lower[j]) << '\n';
    if (std::isfinite(lp.upper[j])) out << " UP BND  " << cname << "  " << detail::mps_number(lp.upper[j]) << '\n';
  }
  out << "ENDATA\n";
}

}  // namespace mmbn
