#pragma once

// Sufficient statistics and (optionally Laplace-smoothed) maximum-likelihood
// CPTs for every (variable, candidate parent set) pair, plus the one-vs-all
// family used by the binary margin.

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmbn/catalog.hpp"
#include "mmbn/data.hpp"

namespace mmbn {

/// Counts for one (variable, parent set) pair. Parent configurations are
/// mixed-radix encoded in parent order with the first parent least
/// significant; counts are laid out as `counts[h * card + j]`.
struct CountFamily {
  std::size_t variable = 0;
  ParentSet parents;
  std::vector<std::size_t> strides;
  std::size_t num_configs = 1;
  int card = 2;
  std::vector<std::int64_t> counts;
  std::vector<std::int64_t> totals;

  std::size_t config_index(std::span<const int> state) const {
    std::size_t h = 0;
    for (std::size_t p = 0; p < parents.size(); ++p) {
      h += strides[p] * static_cast<std::size_t>(state[static_cast<std::size_t>(parents[p])]);
    }
    return h;
  }

  std::int64_t count(int j, std::size_t h) const { return counts[h * card + static_cast<std::size_t>(j)]; }
};

namespace detail {

inline CountFamily empty_family(std::size_t variable, const ParentSet& parents, std::span<const int> cards) {
  CountFamily f;
  f.variable = variable;
  f.parents = parents;
  f.card = cards[variable];
  for (int p : parents) {
    f.strides.push_back(f.num_configs);
    f.num_configs *= static_cast<std::size_t>(cards[static_cast<std::size_t>(p)]);
  }
  f.counts.assign(f.num_configs * static_cast<std::size_t>(f.card), 0);
  f.totals.assign(f.num_configs, 0);
  return f;
}

inline double smoothed_theta(std::int64_t n_jh, std::int64_t n_h, int card, bool laplace) {
  if (laplace) {
    return (static_cast<double>(n_jh) + 1.0) / (static_cast<double>(n_h) + static_cast<double>(card));
  }
  if (n_h == 0) return 1.0 / static_cast<double>(card);
  return static_cast<double>(n_jh) / static_cast<double>(n_h);
}

}  // namespace detail

/// CPT statistics for every catalog position. Counts are exact integers;
/// theta and log theta are derived on access.
class ParamTable {
 public:
  ParamTable() = default;

  static ParamTable fit(const Dataset& ds, const ParentSetCatalog& catalog, bool laplace) {
    if (catalog.num_vars() != ds.num_vars()) {
      throw std::invalid_argument("fit: catalog and dataset disagree on variable count");
    }
    ParamTable t;
    t.catalog_ = catalog;
    t.cards_ = ds.cardinalities();
    t.laplace_ = laplace;
    t.num_samples_ = ds.num_samples();
    t.families_.reserve(catalog.size());
    for (std::size_t i = 0; i < catalog.num_vars(); ++i) {
      for (std::size_t k = 0; k < catalog.num_sets(i); ++k) {
        CountFamily f = detail::empty_family(i, catalog.set(i, k), t.cards_);
        for (std::size_t m = 0; m < ds.num_samples(); ++m) {
          auto row = ds.row(m);
          const std::size_t h = f.config_index(row);
          ++f.counts[h * f.card + static_cast<std::size_t>(row[i])];
          ++f.totals[h];
        }
        t.families_.push_back(std::move(f));
      }
    }
    return t;
  }

  /// Builds a table from precomputed families (one per catalog position).
  static ParamTable from_families(ParentSetCatalog catalog, std::vector<int> cards,
                                  std::vector<CountFamily> families, bool laplace) {
    if (families.size() != catalog.size()) throw std::invalid_argument("family count mismatch");
    ParamTable t;
    t.catalog_ = std::move(catalog);
    t.cards_ = std::move(cards);
    t.families_ = std::move(families);
    t.laplace_ = laplace;
    t.num_samples_ = 0;
    if (!t.families_.empty()) {
      for (auto n : t.families_.front().totals) t.num_samples_ += static_cast<std::size_t>(n);
    }
    return t;
  }

  const ParentSetCatalog& catalog() const noexcept { return catalog_; }
  const std::vector<int>& cardinalities() const noexcept { return cards_; }
  bool laplace() const noexcept { return laplace_; }
  std::size_t num_samples() const noexcept { return num_samples_; }

  const CountFamily& family(std::size_t pos) const { return families_[pos]; }
  const CountFamily& family(std::size_t i, std::size_t k) const { return families_[catalog_.flat(i, k)]; }
  std::size_t num_families() const noexcept { return families_.size(); }

  double theta(std::size_t pos, int j, std::size_t h) const {
    const CountFamily& f = families_[pos];
    return detail::smoothed_theta(f.count(j, h), f.totals[h], f.card, laplace_);
  }
  double log_theta(std::size_t pos, int j, std::size_t h) const { return std::log(theta(pos, j, h)); }

  /// log theta of the entry selected by a full joint state.
  double log_theta_at(std::size_t pos, std::span<const int> state) const {
    const CountFamily& f = families_[pos];
    return log_theta(pos, state[f.variable], f.config_index(state));
  }

 private:
  ParentSetCatalog catalog_;
  std::vector<int> cards_;
  std::vector<CountFamily> families_;
  bool laplace_ = true;
  std::size_t num_samples_ = 0;
};

inline void to_json(nlohmann::json& j, const ParamTable& t) {
  auto fams = nlohmann::json::array();
  for (std::size_t pos = 0; pos < t.num_families(); ++pos) {
    const CountFamily& f = t.family(pos);
    std::vector<double> theta(f.counts.size());
    for (std::size_t h = 0; h < f.num_configs; ++h) {
      for (int v = 0; v < f.card; ++v) theta[h * f.card + static_cast<std::size_t>(v)] = t.theta(pos, v, h);
    }
    fams.push_back({{"variable", f.variable},
                    {"parents", f.parents},
                    {"counts", f.counts},
                    {"theta", theta}});
  }
  j = nlohmann::json{{"cardinalities", t.cardinalities()}, {"laplace", t.laplace()}, {"families", fams}};
}

/// One-vs-all statistics Theta(c): class c is read as slot 0 and every other
/// class as slot 1. Slot-0 counts are the base table's class-c counts; slot-1
/// counts are the class-pooled counts minus the class-c counts, so only the
/// pooled sums are stored in addition to the base table.
class OvaParamTable {
 public:
  static constexpr int ova_classes = 2;

  OvaParamTable() = default;

  static OvaParamTable fit(const Dataset& ds, const ParentSetCatalog& catalog, bool laplace) {
    return from_base(std::make_shared<const ParamTable>(ParamTable::fit(ds, catalog, laplace)));
  }

  static OvaParamTable from_base(std::shared_ptr<const ParamTable> base) {
    OvaParamTable o;
    o.base_ = std::move(base);
    const ParamTable& b = *o.base_;
    o.num_classes_ = b.cardinalities()[Dataset::class_index];
    o.pooled_.resize(b.num_families());
    for (std::size_t pos = 0; pos < b.num_families(); ++pos) {
      const CountFamily& f = b.family(pos);
      if (!has_class_parent(f)) continue;
      const std::size_t rests = f.num_configs / static_cast<std::size_t>(o.num_classes_);
      auto& pooled = o.pooled_[pos];
      pooled.assign(rests * static_cast<std::size_t>(f.card), 0);
      for (std::size_t h = 0; h < f.num_configs; ++h) {
        const std::size_t rest = h / static_cast<std::size_t>(o.num_classes_);
        for (int v = 0; v < f.card; ++v) pooled[rest * f.card + static_cast<std::size_t>(v)] += f.count(v, h);
      }
    }
    return o;
  }

  const ParamTable& base() const { return *base_; }
  std::shared_ptr<const ParamTable> base_ptr() const { return base_; }
  int num_classes() const noexcept { return num_classes_; }

  /// Number of parent configurations of a family under the 2-class view.
  std::size_t num_configs(std::size_t pos) const {
    const CountFamily& f = base_->family(pos);
    return has_class_parent(f) ? f.num_configs / static_cast<std::size_t>(num_classes_) * ova_classes
                               : f.num_configs;
  }
  int card(std::size_t pos) const {
    const CountFamily& f = base_->family(pos);
    return f.variable == Dataset::class_index ? ova_classes : f.card;
  }

  /// Configuration index of `state` whose class slot reads as `slot`.
  std::size_t config_index(std::size_t pos, std::span<const int> state, int slot) const {
    const CountFamily& f = base_->family(pos);
    if (!has_class_parent(f)) return f.config_index(state);
    const std::size_t h = f.config_index(state);
    const std::size_t rest = h / static_cast<std::size_t>(num_classes_);
    return static_cast<std::size_t>(slot) + ova_classes * rest;
  }

  std::int64_t count(int c, std::size_t pos, int j, std::size_t h) const {
    const CountFamily& f = base_->family(pos);
    if (f.variable == Dataset::class_index) {
      // Class node: parents never include the class itself.
      const std::int64_t own = f.count(c, h);
      return j == 0 ? own : f.totals[h] - own;
    }
    if (!has_class_parent(f)) return f.count(j, h);
    const std::size_t slot = h % ova_classes;
    const std::size_t rest = h / ova_classes;
    const std::size_t base_h = static_cast<std::size_t>(c) + static_cast<std::size_t>(num_classes_) * rest;
    const std::int64_t own = f.count(j, base_h);
    return slot == 0 ? own : pooled_[pos][rest * f.card + static_cast<std::size_t>(j)] - own;
  }

  std::int64_t total(int c, std::size_t pos, std::size_t h) const {
    std::int64_t n = 0;
    for (int j = 0; j < card(pos); ++j) n += count(c, pos, j, h);
    return n;
  }

  double theta(int c, std::size_t pos, int j, std::size_t h) const {
    return detail::smoothed_theta(count(c, pos, j, h), total(c, pos, h), card(pos), base_->laplace());
  }
  double log_theta(int c, std::size_t pos, int j, std::size_t h) const { return std::log(theta(c, pos, j, h)); }

  /// Theta(c) as a standalone 2-class table.
  ParamTable table(int c) const {
    std::vector<int> cards = base_->cardinalities();
    cards[Dataset::class_index] = ova_classes;
    std::vector<CountFamily> fams;
    for (std::size_t pos = 0; pos < base_->num_families(); ++pos) {
      const CountFamily& bf = base_->family(pos);
      CountFamily f = detail::empty_family(bf.variable, bf.parents, cards);
      for (std::size_t h = 0; h < f.num_configs; ++h) {
        for (int j = 0; j < f.card; ++j) {
          const std::int64_t n = count(c, pos, j, h);
          f.counts[h * f.card + static_cast<std::size_t>(j)] = n;
          f.totals[h] += n;
        }
      }
      fams.push_back(std::move(f));
    }
    return ParamTable::from_families(base_->catalog(), std::move(cards), std::move(fams), base_->laplace());
  }

 private:
  static bool has_class_parent(const CountFamily& f) {
    return !f.parents.empty() && f.parents.front() == static_cast<int>(Dataset::class_index);
  }

  std::shared_ptr<const ParamTable> base_;
  std::vector<std::vector<std::int64_t>> pooled_;
  int num_classes_ = 2;
};

/// log P(x) = sum_i log theta_{x_i | x_{pa(i)}} under the structure's
/// selections. Returns -inf when an unsmoothed zero parameter is hit and, if
/// `diagnostic` is given, names the variable responsible.
inline double log_joint(const ParamTable& params, const Structure& structure, std::span<const int> state,
                        std::string* diagnostic = nullptr) {
  const ParentSetCatalog& cat = params.catalog();
  if (structure.num_vars() != cat.num_vars() || state.size() != cat.num_vars()) {
    throw std::invalid_argument("log_joint: size mismatch");
  }
  double lp = 0.0;
  for (std::size_t i = 0; i < cat.num_vars(); ++i) {
    std::size_t k;
    if (structure.has_selection()) {
      k = structure.selection()[i];
    } else {
      auto found = cat.find(i, structure.parents(i));
      if (!found) throw std::invalid_argument("log_joint: parent set not in table");
      k = *found;
    }
    const double t = params.theta(cat.flat(i, k), state[i], params.family(i, k).config_index(state));
    if (t <= 0.0) {
      if (diagnostic) *diagnostic = "zero parameter at variable " + std::to_string(i);
      return -std::numeric_limits<double>::infinity();
    }
    lp += std::log(t);
  }
  return lp;
}

}  // namespace mmbn
