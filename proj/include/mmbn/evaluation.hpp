#pragma once

// End-to-end learning: score -> coefficients -> MILP -> branch-and-bound ->
// classifier, plus grid model selection and cross-validation.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmbn/catalog.hpp"
#include "mmbn/classifier.hpp"
#include "mmbn/coefficients.hpp"
#include "mmbn/data.hpp"
#include "mmbn/estimation.hpp"
#include "mmbn/milp.hpp"
#include "mmbn/solver.hpp"

namespace mmbn {

enum class LearnScore { sm, sbm, mdl, nb };

inline const char* to_string(LearnScore s) {
  switch (s) {
    case LearnScore::sm: return "sm";
    case LearnScore::sbm: return "sbm";
    case LearnScore::mdl: return "mdl";
    case LearnScore::nb: return "nb";
  }
  return "?";
}

inline LearnScore parse_learn_score(const std::string& s) {
  if (s == "nb") return LearnScore::nb;
  switch (parse_score_kind(s)) {
    case ScoreKind::sm: return LearnScore::sm;
    case ScoreKind::sbm: return LearnScore::sbm;
    case ScoreKind::mdl: return LearnScore::mdl;
  }
  return LearnScore::sm;
}

inline bool uses_gamma(LearnScore s) { return s == LearnScore::sm || s == LearnScore::sbm; }

/// Everything needed to go from a MILP to a structure, kept for reporting.
struct LearnedStructure {
  Structure structure;
  SolveResult solve;
  /// True when the solver returned no incumbent and the empty graph was used.
  bool fallback = false;
  std::size_t catalog_size = 0;
};

/// Builds the MILP for `score` on `train`.
inline MilpModel build_learning_milp(const Dataset& train, LearnScore score, double gamma, int max_parents,
                                     double delta = 1.0) {
  if (score == LearnScore::nb) throw std::invalid_argument("naive Bayes has no MILP");
  const int k = std::clamp(max_parents, 0, static_cast<int>(train.num_vars()) - 1);
  if (score == LearnScore::mdl) {
    auto catalog = ParentSetCatalog::enumerate(train.num_vars(), k, CatalogMode::generative);
    return build_milp(build_mdl(train, catalog), catalog, delta);
  }
  auto catalog = ParentSetCatalog::enumerate(train.num_vars(), k, CatalogMode::margin);
  if (score == LearnScore::sm) {
    const ParamTable params = ParamTable::fit(train, catalog, true);
    return build_milp(build_sm(train, catalog, params, gamma), catalog, delta);
  }
  const OvaParamTable ova = OvaParamTable::fit(train, catalog, true);
  return build_milp(build_sbm(train, catalog, ova, gamma), catalog, delta);
}

/// Learns a structure. Without an incumbent the empty graph is returned and
/// `fallback` is set.
inline LearnedStructure learn_structure(const Dataset& train, LearnScore score, double gamma, int max_parents,
                                        double delta, const SolverConfig& solver) {
  LearnedStructure out;
  if (score == LearnScore::nb) {
    auto catalog = ParentSetCatalog::enumerate(train.num_vars(), 1, CatalogMode::margin);
    out.structure = naive_bayes_structure(catalog);
    out.catalog_size = catalog.size();
    out.solve.incumbent = out.structure;
    out.solve.status = SolveStatus::optimal;
    out.solve.objective = out.solve.upper_bound = 0.0;
    out.solve.gap_percent = 0.0;
    return out;
  }
  const MilpModel model = build_learning_milp(train, score, gamma, max_parents, delta);
  out.catalog_size = model.catalog.size();
  out.solve = branch_and_bound(model, solver);
  if (out.solve.incumbent) {
    out.structure = *out.solve.incumbent;
  } else {
    out.structure = Structure::empty(model.catalog);
    out.fallback = true;
  }
  return out;
}

struct LearnConfig {
  LearnScore score = LearnScore::sm;
  /// Candidate p values; gamma = log(p / (1 - p)).
  std::vector<double> p_grid = default_p_grid();
  /// Raw gamma override; replaces the p grid when set.
  std::optional<double> gamma;
  std::vector<int> max_parents = {1, 2};
  double delta = 1.0;
  SolverConfig solver;
  std::uint64_t seed = 1;
  std::size_t inner_folds = 5;
  double holdout_fraction = 0.2;
  std::size_t holdout_threshold = 1000;
};

struct GridPoint {
  double p = 0.0;  // 0 when gamma was given directly or unused
  double gamma = 0.0;
  int max_parents = 0;
  std::size_t correct = 0;
  std::size_t n = 0;
  double accuracy = 0.0;
};

struct SelectionResult {
  GridPoint chosen;
  std::vector<GridPoint> grid;
  std::string protocol;  // "holdout", "kfold" or "none"
};

namespace detail {

inline std::vector<GridPoint> grid_points(const LearnConfig& cfg, std::size_t num_vars) {
  std::vector<std::pair<double, double>> gammas;  // (gamma, p)
  if (!uses_gamma(cfg.score)) {
    gammas.emplace_back(0.0, 0.0);
  } else if (cfg.gamma) {
    gammas.emplace_back(*cfg.gamma, 0.0);
  } else {
    if (cfg.p_grid.empty()) throw std::invalid_argument("empty p grid");
    for (double p : cfg.p_grid) gammas.emplace_back(gamma_from_p(p), p);
  }
  std::sort(gammas.begin(), gammas.end());
  gammas.erase(std::unique(gammas.begin(), gammas.end(),
                           [](const auto& a, const auto& b) { return a.first == b.first; }),
               gammas.end());

  std::vector<int> ks;
  if (cfg.score == LearnScore::nb) {
    ks.push_back(1);
  } else {
    if (cfg.max_parents.empty()) throw std::invalid_argument("empty max-parents grid");
    for (int k : cfg.max_parents) {
      if (k < 0) throw std::invalid_argument("max-parents must be >= 0");
      ks.push_back(std::min(k, static_cast<int>(num_vars) - 1));
    }
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  }

  std::vector<GridPoint> out;
  for (int k : ks) {
    for (auto [g, p] : gammas) {
      GridPoint gp;
      gp.gamma = g;
      gp.p = p;
      gp.max_parents = k;
      out.push_back(gp);
    }
  }
  return out;
}

}  // namespace detail

/// Trains a classifier with a fixed (gamma, K).
inline BnClassifier fit_classifier(const Dataset& train, const LearnConfig& cfg, double gamma, int max_parents,
                                   LearnedStructure* learned = nullptr) {
  LearnedStructure ls = learn_structure(train, cfg.score, gamma, max_parents, cfg.delta, cfg.solver);
  BnClassifier clf = BnClassifier::train(train, ls.structure, true);
  if (learned) *learned = std::move(ls);
  return clf;
}

/// Picks (gamma, K) by inner validation on `train` only: a holdout split
/// when train has more than `holdout_threshold` samples, otherwise k-fold.
/// Ties go to smaller K, then smaller gamma.
inline SelectionResult select_model(const Dataset& train, const LearnConfig& cfg) {
  SelectionResult res;
  res.grid = detail::grid_points(cfg, train.num_vars());
  if (res.grid.size() == 1 || train.num_samples() < 2) {
    res.chosen = res.grid.front();
    res.protocol = "none";
    return res;
  }
  FoldPlan plan;
  if (train.num_samples() > cfg.holdout_threshold) {
    plan = make_holdout(train, cfg.holdout_fraction, cfg.seed);
    res.protocol = "holdout";
  } else {
    plan = make_folds(train, std::min(cfg.inner_folds, train.num_samples()), cfg.seed);
    res.protocol = "kfold";
  }
  const std::size_t rounds = res.protocol == "holdout" ? 1 : plan.k;

  std::vector<Dataset> fit_sets, val_sets;
  for (std::size_t f = 0; f < rounds; ++f) {
    const std::size_t val_fold = res.protocol == "holdout" ? 1 : f;
    fit_sets.push_back(train.subset(plan.train_indices(val_fold)));
    val_sets.push_back(train.subset(plan.test_indices(val_fold)));
  }

  for (auto& gp : res.grid) {
    for (std::size_t f = 0; f < rounds; ++f) {
      const BnClassifier clf = fit_classifier(fit_sets[f], cfg, gp.gamma, gp.max_parents);
      const EvalReport rep = evaluate(clf, val_sets[f]);
      gp.correct += rep.correct;
      gp.n += rep.n;
    }
    gp.accuracy = gp.n ? static_cast<double>(gp.correct) / static_cast<double>(gp.n) : 0.0;
  }
  // Grid is ordered by (K, gamma) ascending, so the first maximum wins ties.
  const GridPoint* best = &res.grid.front();
  for (const auto& gp : res.grid) {
    if (gp.correct * best->n > best->correct * gp.n) best = &gp;
  }
  res.chosen = *best;
  return res;
}

struct CrossValidationResult {
  EvalReport report;
  std::vector<SelectionResult> selections;
  std::vector<LearnedStructure> structures;
};

/// Outer cross-validation. Each fold selects (gamma, K) on its training
/// part, retrains on the full training part and scores the held-out fold.
/// Predictions and margins are reported in dataset order.
inline CrossValidationResult cross_validate(const Dataset& ds, const FoldPlan& plan, const LearnConfig& cfg) {
  if (plan.assignment.size() != ds.num_samples()) throw std::invalid_argument("fold plan does not match dataset");
  CrossValidationResult out;
  EvalReport& pooled = out.report;
  const auto k = static_cast<std::size_t>(ds.num_classes());
  pooled.confusion.assign(k, std::vector<std::size_t>(k, 0));
  pooled.margins.assign(ds.num_samples(), 0.0);
  pooled.predictions.assign(ds.num_samples(), -1);

  for (std::size_t f = 0; f < plan.k; ++f) {
    const auto train_idx = plan.train_indices(f);
    const auto test_idx = plan.test_indices(f);
    if (test_idx.empty()) continue;
    const Dataset train = ds.subset(train_idx);
    const Dataset test = ds.subset(test_idx);

    LearnConfig inner = cfg;
    inner.seed = cfg.seed + 1000003ULL * (f + 1);
    SelectionResult sel = select_model(train, inner);
    LearnedStructure learned;
    const BnClassifier clf = fit_classifier(train, cfg, sel.chosen.gamma, sel.chosen.max_parents, &learned);
    const EvalReport rep = evaluate(clf, test);

    for (std::size_t t = 0; t < test_idx.size(); ++t) {
      const std::size_t m = test_idx[t];
      pooled.margins[m] = rep.margins[t];
      pooled.predictions[m] = rep.predictions[t];
    }
    for (std::size_t u : rep.unseen_class_samples) pooled.unseen_class_samples.push_back(test_idx[u]);
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) pooled.confusion[a][b] += rep.confusion[a][b];
    }
    pooled.n += rep.n;
    pooled.correct += rep.correct;

    FoldReport fr;
    fr.fold = f;
    fr.n = rep.n;
    fr.correct = rep.correct;
    fr.accuracy = rep.accuracy;
    fr.max_parents = sel.chosen.max_parents;
    fr.gamma = sel.chosen.gamma;
    fr.p = sel.chosen.p;
    fr.solve_status = learned.fallback ? "no-incumbent" : to_string(learned.solve.status);
    fr.gap_percent = learned.solve.gap_percent;
    pooled.folds.push_back(fr);
    out.selections.push_back(std::move(sel));
    out.structures.push_back(std::move(learned));
  }
  std::sort(pooled.unseen_class_samples.begin(), pooled.unseen_class_samples.end());
  pooled.finalize();
  return out;
}

}  // namespace mmbn
