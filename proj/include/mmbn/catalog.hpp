#pragma once

// Candidate parent sets per variable and the stacked selection vector that
// picks one of them for every variable.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace mmbn {

/// Sorted variable indices.
using ParentSet = std::vector<int>;

enum class CatalogMode { margin, generative };

inline const char* to_string(CatalogMode mode) {
  return mode == CatalogMode::margin ? "margin" : "generative";
}

/// Per-variable candidate parent sets S_i, laid out contiguously so that
/// position `offset(i) + k` in the selection vector is the k-th set of
/// variable i.
class ParentSetCatalog {
 public:
  static constexpr int class_index = 0;

  ParentSetCatalog() = default;

  /// Enumerates all parent sets of size <= max_parents, ordered by
  /// (size, lexicographic). In margin mode, non-class variables only keep
  /// the empty set and sets containing the class: any other parent set
  /// leaves every class comparison unchanged.
  static ParentSetCatalog enumerate(std::size_t num_vars, int max_parents, CatalogMode mode) {
    if (num_vars < 2) throw std::invalid_argument("catalog: need at least 2 variables");
    if (max_parents < 0) throw std::invalid_argument("catalog: max_parents must be >= 0");
    if (static_cast<std::size_t>(max_parents) > num_vars - 1) {
      throw std::invalid_argument("catalog: max_parents exceeds N-1");
    }
    std::vector<std::vector<ParentSet>> sets(num_vars);
    for (std::size_t i = 0; i < num_vars; ++i) {
      std::vector<int> others;
      for (std::size_t v = 0; v < num_vars; ++v) {
        if (v != i) others.push_back(static_cast<int>(v));
      }
      for (int size = 0; size <= max_parents; ++size) {
        for_each_subset(others, size, [&](const ParentSet& s) {
          const bool keep = mode == CatalogMode::generative || i == class_index || s.empty() ||
                            s.front() == class_index;
          if (keep) sets[i].push_back(s);
        });
      }
    }
    return ParentSetCatalog(std::move(sets), max_parents, mode);
  }

  /// Catalog from explicit, non-empty lists of sets.
  static ParentSetCatalog from_sets(std::vector<std::vector<ParentSet>> sets,
                                    CatalogMode mode = CatalogMode::generative) {
    int k = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      for (auto& s : sets[i]) {
        std::sort(s.begin(), s.end());
        if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
          throw std::invalid_argument("catalog: repeated parent in a set");
        }
        for (int p : s) {
          if (p < 0 || static_cast<std::size_t>(p) >= sets.size() || static_cast<std::size_t>(p) == i) {
            throw std::invalid_argument("catalog: invalid parent index");
          }
        }
        k = std::max(k, static_cast<int>(s.size()));
      }
    }
    return ParentSetCatalog(std::move(sets), k, mode);
  }

  std::size_t num_vars() const noexcept { return sets_.size(); }
  int max_parents() const noexcept { return max_parents_; }
  CatalogMode mode() const noexcept { return mode_; }

  std::size_t num_sets(std::size_t i) const { return sets_[i].size(); }
  const std::vector<ParentSet>& sets(std::size_t i) const { return sets_[i]; }
  const ParentSet& set(std::size_t i, std::size_t k) const { return sets_[i][k]; }

  /// Total length of the selection vector.
  std::size_t size() const noexcept { return offsets_.back(); }
  std::size_t offset(std::size_t i) const { return offsets_[i]; }
  const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }
  std::size_t flat(std::size_t i, std::size_t k) const { return offsets_[i] + k; }

  std::pair<std::size_t, std::size_t> unflat(std::size_t pos) const {
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), pos);
    const auto i = static_cast<std::size_t>(it - offsets_.begin()) - 1;
    return {i, pos - offsets_[i]};
  }

  std::optional<std::size_t> find(std::size_t i, const ParentSet& s) const {
    auto it = std::find(sets_[i].begin(), sets_[i].end(), s);
    if (it == sets_[i].end()) return std::nullopt;
    return static_cast<std::size_t>(it - sets_[i].begin());
  }

  friend bool operator==(const ParentSetCatalog& a, const ParentSetCatalog& b) {
    return a.sets_ == b.sets_ && a.mode_ == b.mode_;
  }

 private:
  ParentSetCatalog(std::vector<std::vector<ParentSet>> sets, int max_parents, CatalogMode mode)
      : sets_(std::move(sets)), max_parents_(max_parents), mode_(mode) {
    offsets_.assign(1, 0);
    for (const auto& s : sets_) {
      if (s.empty()) throw std::invalid_argument("catalog: every variable needs at least one parent set");
      offsets_.push_back(offsets_.back() + s.size());
    }
  }

  template <typename F>
  static void for_each_subset(const std::vector<int>& pool, int size, F&& f) {
    ParentSet cur;
    auto rec = [&](auto&& self, std::size_t start) -> void {
      if (static_cast<int>(cur.size()) == size) {
        f(cur);
        return;
      }
      for (std::size_t t = start; t < pool.size(); ++t) {
        cur.push_back(pool[t]);
        self(self, t + 1);
        cur.pop_back();
      }
    };
    rec(rec, 0);
  }

  std::vector<std::vector<ParentSet>> sets_;
  std::vector<std::size_t> offsets_{0};
  int max_parents_ = 0;
  CatalogMode mode_ = CatalogMode::generative;
};

inline void to_json(nlohmann::json& j, const ParentSetCatalog& c) {
  j = nlohmann::json::object();
  j["mode"] = to_string(c.mode());
  j["max_parents"] = c.max_parents();
  auto vars = nlohmann::json::array();
  for (std::size_t i = 0; i < c.num_vars(); ++i) vars.push_back(c.sets(i));
  j["parent_sets"] = std::move(vars);
}

/// A directed graph given by one parent set per variable, optionally tied
/// to the catalog positions it was selected from.
class Structure {
 public:
  Structure() = default;
  explicit Structure(std::vector<ParentSet> parents, std::vector<std::size_t> selection = {})
      : parents_(std::move(parents)), selection_(std::move(selection)) {
    for (auto& p : parents_) std::sort(p.begin(), p.end());
  }

  static Structure from_selection(const ParentSetCatalog& catalog, std::vector<std::size_t> selection) {
    if (selection.size() != catalog.num_vars()) throw std::invalid_argument("selection size mismatch");
    std::vector<ParentSet> parents;
    for (std::size_t i = 0; i < selection.size(); ++i) {
      if (selection[i] >= catalog.num_sets(i)) throw std::invalid_argument("selection out of range");
      parents.push_back(catalog.set(i, selection[i]));
    }
    return Structure(std::move(parents), std::move(selection));
  }

  static Structure empty(const ParentSetCatalog& catalog) {
    return from_selection(catalog, std::vector<std::size_t>(catalog.num_vars(), 0));
  }

  std::size_t num_vars() const noexcept { return parents_.size(); }
  const ParentSet& parents(std::size_t i) const { return parents_[i]; }
  const std::vector<ParentSet>& all_parents() const noexcept { return parents_; }
  const std::vector<std::size_t>& selection() const noexcept { return selection_; }
  bool has_selection() const noexcept { return !selection_.empty(); }

  std::size_t num_edges() const {
    std::size_t e = 0;
    for (const auto& p : parents_) e += p.size();
    return e;
  }

  /// Topological order (Kahn, smallest index first among ready nodes), or
  /// nullopt if the graph has a cycle.
  std::optional<std::vector<std::size_t>> topological_order() const {
    const std::size_t n = parents_.size();
    std::vector<std::size_t> indegree(n, 0);
    std::vector<std::vector<std::size_t>> children(n);
    for (std::size_t j = 0; j < n; ++j) {
      for (int p : parents_[j]) {
        children[static_cast<std::size_t>(p)].push_back(j);
        ++indegree[j];
      }
    }
    std::vector<std::size_t> order;
    std::vector<bool> done(n, false);
    while (order.size() < n) {
      std::size_t next = n;
      for (std::size_t v = 0; v < n; ++v) {
        if (!done[v] && indegree[v] == 0) {
          next = v;
          break;
        }
      }
      if (next == n) return std::nullopt;
      done[next] = true;
      order.push_back(next);
      for (std::size_t c : children[next]) --indegree[c];
    }
    return order;
  }

  bool is_acyclic() const { return topological_order().has_value(); }

  /// Stacked 0/1 selection vector over `catalog`.
  std::vector<double> eta(const ParentSetCatalog& catalog) const {
    std::vector<double> out(catalog.size(), 0.0);
    for (std::size_t i = 0; i < num_vars(); ++i) {
      std::size_t k;
      if (has_selection()) {
        k = selection_[i];
      } else {
        auto found = catalog.find(i, parents_[i]);
        if (!found) throw std::invalid_argument("structure not representable in catalog");
        k = *found;
      }
      out[catalog.flat(i, k)] = 1.0;
    }
    return out;
  }

  friend bool operator==(const Structure& a, const Structure& b) { return a.parents_ == b.parents_; }

 private:
  std::vector<ParentSet> parents_;
  std::vector<std::size_t> selection_;
};

inline void to_json(nlohmann::json& j, const Structure& s) {
  j = nlohmann::json{{"parents", s.all_parents()}};
  if (s.has_selection()) j["selection"] = s.selection();
}

inline void from_json(const nlohmann::json& j, Structure& s) {
  std::vector<ParentSet> parents = j.at("parents").get<std::vector<ParentSet>>();
  std::vector<std::size_t> sel;
  if (j.contains("selection")) sel = j.at("selection").get<std::vector<std::size_t>>();
  s = Structure(std::move(parents), std::move(sel));
}

/// Decodes a binary selection vector: exactly one 1 per variable block.
inline Structure structure_from_eta(const ParentSetCatalog& catalog, std::span<const double> eta,
                                    double tol = 1e-9) {
  if (eta.size() != catalog.size()) throw std::invalid_argument("eta length does not match catalog");
  std::vector<std::size_t> sel(catalog.num_vars());
  for (std::size_t i = 0; i < catalog.num_vars(); ++i) {
    std::size_t ones = 0;
    for (std::size_t k = 0; k < catalog.num_sets(i); ++k) {
      const double v = eta[catalog.flat(i, k)];
      if (std::abs(v - 1.0) <= tol) {
        ++ones;
        sel[i] = k;
      } else if (std::abs(v) > tol) {
        throw std::invalid_argument("eta is not binary at variable " + std::to_string(i));
      }
    }
    if (ones != 1) {
      throw std::invalid_argument("variable " + std::to_string(i) + " selects " +
                                  std::to_string(ones) + " parent sets");
    }
  }
  return Structure::from_selection(catalog, std::move(sel));
}

/// Graphviz rendering, one node per variable, one edge per parent relation.
inline std::string to_dot(const Structure& s, std::span<const std::string> names = {}) {
  auto name = [&](std::size_t i) {
    return i < names.size() ? names[i] : (i == 0 ? std::string("C") : "X" + std::to_string(i));
  };
  std::string out = "digraph bn {\n";
  for (std::size_t i = 0; i < s.num_vars(); ++i) out += "  \"" + name(i) + "\";\n";
  for (std::size_t j = 0; j < s.num_vars(); ++j) {
    for (int p : s.parents(j)) {
      out += "  \"" + name(static_cast<std::size_t>(p)) + "\" -> \"" + name(j) + "\";\n";
    }
  }
  out += "}\n";
  return out;
}

}  // namespace mmbn
