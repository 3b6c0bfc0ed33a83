#pragma once

// Linear objective and margin coefficients over the selection vector, and
// direct scoring of fixed structures.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmbn/catalog.hpp"
#include "mmbn/data.hpp"
#include "mmbn/estimation.hpp"

namespace mmbn {

enum class ScoreKind { sm, sbm, mdl };

inline const char* to_string(ScoreKind s) {
  switch (s) {
    case ScoreKind::sm: return "sm";
    case ScoreKind::sbm: return "sbm";
    case ScoreKind::mdl: return "mdl";
  }
  return "?";
}

inline ScoreKind parse_score_kind(const std::string& s) {
  if (s == "sm") return ScoreKind::sm;
  if (s == "sbm") return ScoreKind::sbm;
  if (s == "mdl") return ScoreKind::mdl;
  throw std::invalid_argument("unknown score '" + s + "'");
}

/// gamma = log(p / (1 - p)).
inline double gamma_from_p(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("gamma_from_p: p must lie in (0,1)");
  return std::log(p / (1.0 - p));
}

inline std::vector<double> default_p_grid() { return {0.501, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999}; }

inline std::vector<double> gamma_grid(std::span<const double> ps) {
  std::vector<double> out;
  for (double p : ps) out.push_back(gamma_from_p(p));
  return out;
}

/// Dense coefficient rows with one column per catalog position.
///
/// sm:  one row per (sample m, competing class c != c^m), m-major.
/// sbm: one row per sample.
/// mdl: no rows; `omega` holds the local scores.
class CoefficientBank {
 public:
  CoefficientBank() = default;

  ScoreKind kind() const noexcept { return kind_; }
  double gamma() const noexcept { return gamma_; }
  std::size_t width() const noexcept { return offsets_.empty() ? 0 : offsets_.back(); }
  std::size_t num_rows() const noexcept { return row_sample_.size(); }
  std::size_t num_samples() const noexcept { return num_samples_; }
  const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }

  std::span<const double> row(std::size_t r) const { return {coeffs_.data() + r * width(), width()}; }
  std::size_t row_sample(std::size_t r) const { return row_sample_[r]; }
  int row_class(std::size_t r) const { return row_class_[r]; }
  const std::vector<double>& omega() const noexcept { return omega_; }

  /// Per-sample log-margins for a block-valid selection vector (sm/sbm).
  std::vector<double> log_margins(std::span<const double> eta) const {
    validate(eta);
    std::vector<double> margins(num_samples_, std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < num_rows(); ++r) {
      margins[row_sample_[r]] = std::min(margins[row_sample_[r]], dot(row(r), eta));
    }
    return margins;
  }

  /// SM / SBM: sum_m min(log margin_m, gamma); MDL: omega . eta.
  double score(std::span<const double> eta) const {
    if (kind_ == ScoreKind::mdl) {
      validate(eta);
      return dot(omega_, eta);
    }
    double total = 0.0;
    for (double lm : log_margins(eta)) total += std::min(lm, gamma_);
    return total;
  }

  /// Throws unless eta is binary with exactly one selection per block.
  void validate(std::span<const double> eta) const {
    if (eta.size() != width()) throw std::invalid_argument("score: eta length mismatch");
    for (std::size_t i = 0; i + 1 < offsets_.size(); ++i) {
      int ones = 0;
      for (std::size_t p = offsets_[i]; p < offsets_[i + 1]; ++p) {
        if (eta[p] == 1.0) {
          ++ones;
        } else if (eta[p] != 0.0) {
          throw std::invalid_argument("score: eta is not binary");
        }
      }
      if (ones != 1) throw std::invalid_argument("score: variable " + std::to_string(i) + " is not block-valid");
    }
  }

  static double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t p = 0; p < a.size(); ++p) s += a[p] * b[p];
    return s;
  }

  // Builders fill the bank directly.
  friend CoefficientBank build_sm(const Dataset&, const ParentSetCatalog&, const ParamTable&, double);
  friend CoefficientBank build_sbm(const Dataset&, const ParentSetCatalog&, const OvaParamTable&, double);
  friend CoefficientBank build_mdl(const Dataset&, const ParentSetCatalog&);

 private:
  ScoreKind kind_ = ScoreKind::sm;
  double gamma_ = 0.0;
  std::size_t num_samples_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<double> coeffs_;
  std::vector<std::size_t> row_sample_;
  std::vector<int> row_class_;
  std::vector<double> omega_;
};

inline double score_structure(const CoefficientBank& bank, std::span<const double> eta) { return bank.score(eta); }

namespace detail {

inline void check_inputs(const Dataset& ds, const ParentSetCatalog& catalog, const ParamTable& params) {
  if (catalog.num_vars() != ds.num_vars()) throw std::invalid_argument("catalog/dataset size mismatch");
  if (!(params.catalog() == catalog)) throw std::invalid_argument("parameters fitted on another catalog");
  if (params.cardinalities() != ds.cardinalities()) {
    throw std::invalid_argument("parameters fitted on other cardinalities");
  }
  if (!params.laplace()) throw std::invalid_argument("margin coefficients need Laplace-smoothed parameters");
}

inline bool margin_relevant(const ParentSetCatalog& catalog, std::size_t i, std::size_t k) {
  if (i == Dataset::class_index) return true;
  const ParentSet& s = catalog.set(i, k);
  return !s.empty() && s.front() == static_cast<int>(Dataset::class_index);
}

}  // namespace detail

/// alpha(i,k,m,c) = log theta of sample m's entry minus log theta of the
/// same entry with the class replaced by c. Rejects c == c^m.
inline double sm_coefficient(const Dataset& ds, const ParamTable& params, std::size_t i, std::size_t k,
                             std::size_t m, int c) {
  const int cm = ds.label(m);
  if (c == cm) throw std::invalid_argument("sm_coefficient: c equals the sample's own class");
  const std::size_t pos = params.catalog().flat(i, k);
  std::vector<int> flipped(ds.row(m).begin(), ds.row(m).end());
  flipped[Dataset::class_index] = c;
  return params.log_theta_at(pos, ds.row(m)) - params.log_theta_at(pos, flipped);
}

inline CoefficientBank build_sm(const Dataset& ds, const ParentSetCatalog& catalog, const ParamTable& params,
                                double gamma) {
  detail::check_inputs(ds, catalog, params);
  CoefficientBank bank;
  bank.kind_ = ScoreKind::sm;
  bank.gamma_ = gamma;
  bank.num_samples_ = ds.num_samples();
  bank.offsets_ = catalog.offsets();
  const std::size_t width = catalog.size();
  const int classes = ds.num_classes();
  bank.coeffs_.reserve(ds.num_samples() * static_cast<std::size_t>(classes - 1) * width);

  std::vector<double> own(width);
  std::vector<int> flipped(ds.num_vars());
  for (std::size_t m = 0; m < ds.num_samples(); ++m) {
    auto row = ds.row(m);
    for (std::size_t pos = 0; pos < width; ++pos) own[pos] = params.log_theta_at(pos, row);
    for (int c = 0; c < classes; ++c) {
      if (c == ds.label(m)) continue;
      std::copy(row.begin(), row.end(), flipped.begin());
      flipped[Dataset::class_index] = c;
      for (std::size_t i = 0; i < catalog.num_vars(); ++i) {
        for (std::size_t k = 0; k < catalog.num_sets(i); ++k) {
          const std::size_t pos = catalog.flat(i, k);
          bank.coeffs_.push_back(detail::margin_relevant(catalog, i, k)
                                     ? own[pos] - params.log_theta_at(pos, flipped)
                                     : 0.0);
        }
      }
      bank.row_sample_.push_back(m);
      bank.row_class_.push_back(c);
    }
  }
  return bank;
}

/// abar(i,k,m): log-ratio of slot 0 versus slot 1 under Theta(c^m).
inline CoefficientBank build_sbm(const Dataset& ds, const ParentSetCatalog& catalog, const OvaParamTable& ova,
                                 double gamma) {
  detail::check_inputs(ds, catalog, ova.base());
  CoefficientBank bank;
  bank.kind_ = ScoreKind::sbm;
  bank.gamma_ = gamma;
  bank.num_samples_ = ds.num_samples();
  bank.offsets_ = catalog.offsets();
  const std::size_t width = catalog.size();
  bank.coeffs_.reserve(ds.num_samples() * width);

  std::vector<int> state(ds.num_vars());
  for (std::size_t m = 0; m < ds.num_samples(); ++m) {
    auto row = ds.row(m);
    const int cm = ds.label(m);
    std::copy(row.begin(), row.end(), state.begin());
    for (std::size_t i = 0; i < catalog.num_vars(); ++i) {
      for (std::size_t k = 0; k < catalog.num_sets(i); ++k) {
        const std::size_t pos = catalog.flat(i, k);
        if (!detail::margin_relevant(catalog, i, k)) {
          bank.coeffs_.push_back(0.0);
          continue;
        }
        double a;
        if (i == Dataset::class_index) {
          const std::size_t h = ova.config_index(pos, state, 0);
          a = ova.log_theta(cm, pos, 0, h) - ova.log_theta(cm, pos, 1, h);
        } else {
          const int j = row[i];
          a = ova.log_theta(cm, pos, j, ova.config_index(pos, state, 0)) -
              ova.log_theta(cm, pos, j, ova.config_index(pos, state, 1));
        }
        bank.coeffs_.push_back(a);
      }
    }
    bank.row_sample_.push_back(m);
    bank.row_class_.push_back(-1);
  }
  return bank;
}

/// Local MDL score in bits: LL - (log2 M)/2 * (#parent configs) * (sp - 1),
/// with raw counts in the log-likelihood and 0 log 0 = 0.
inline double mdl_local_score(const CountFamily& f, std::size_t num_samples) {
  double ll = 0.0;
  for (std::size_t h = 0; h < f.num_configs; ++h) {
    const auto nh = f.totals[h];
    if (nh == 0) continue;
    for (int j = 0; j < f.card; ++j) {
      const auto n = f.count(j, h);
      if (n > 0) ll += static_cast<double>(n) * std::log2(static_cast<double>(n) / static_cast<double>(nh));
    }
  }
  const double penalty = std::log2(static_cast<double>(num_samples)) / 2.0 *
                         static_cast<double>(f.num_configs) * static_cast<double>(f.card - 1);
  return ll - penalty;
}

inline CoefficientBank build_mdl(const Dataset& ds, const ParentSetCatalog& catalog) {
  if (catalog.num_vars() != ds.num_vars()) throw std::invalid_argument("catalog/dataset size mismatch");
  const ParamTable counts = ParamTable::fit(ds, catalog, false);
  CoefficientBank bank;
  bank.kind_ = ScoreKind::mdl;
  bank.num_samples_ = ds.num_samples();
  bank.offsets_ = catalog.offsets();
  bank.omega_.reserve(catalog.size());
  for (std::size_t pos = 0; pos < catalog.size(); ++pos) {
    bank.omega_.push_back(mdl_local_score(counts.family(pos), ds.num_samples()));
  }
  return bank;
}

inline void to_json(nlohmann::json& j, const CoefficientBank& b) {
  j = nlohmann::json{{"kind", to_string(b.kind())}, {"gamma", b.gamma()}, {"offsets", b.offsets()}};
  if (b.kind() == ScoreKind::mdl) {
    j["omega"] = b.omega();
    return;
  }
  auto rows = nlohmann::json::array();
  for (std::size_t r = 0; r < b.num_rows(); ++r) {
    auto span = b.row(r);
    rows.push_back({{"sample", b.row_sample(r)},
                    {"class", b.row_class(r)},
                    {"coefficients", std::vector<double>(span.begin(), span.end())}});
  }
  j["rows"] = std::move(rows);
}

}  // namespace mmbn
