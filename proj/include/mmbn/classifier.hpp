#pragma once

// Bayesian network classifiers over a fixed structure: prediction, margins,
// accuracy reports and the JSON model bundle.

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

/// Naive Bayes: the class has no parents, every feature has exactly {C}.
inline Structure naive_bayes_structure(const ParentSetCatalog& catalog) {
  std::vector<std::size_t> sel(catalog.num_vars(), 0);
  const ParentSet class_only{static_cast<int>(Dataset::class_index)};
  for (std::size_t i = 0; i < catalog.num_vars(); ++i) {
    auto k = catalog.find(i, i == Dataset::class_index ? ParentSet{} : class_only);
    if (!k) throw std::invalid_argument("naive_bayes_structure: catalog lacks the required parent set");
    sel[i] = *k;
  }
  return Structure::from_selection(catalog, std::move(sel));
}

class BnClassifier {
 public:
  BnClassifier() = default;

  /// Fits the CPTs of `structure` on `train`.
  static BnClassifier train(const Dataset& train, const Structure& structure, bool laplace = true) {
    if (structure.num_vars() != train.num_vars()) throw std::invalid_argument("classifier: structure size mismatch");
    if (!structure.is_acyclic()) throw std::invalid_argument("classifier: structure is cyclic");
    BnClassifier clf;
    clf.catalog_ = single_set_catalog(structure);
    clf.structure_ = Structure::from_selection(clf.catalog_, std::vector<std::size_t>(structure.num_vars(), 0));
    clf.params_ = ParamTable::fit(train, clf.catalog_, laplace);
    clf.columns_ = train.columns();
    return clf;
  }

  static BnClassifier from_params(const Structure& structure, ParamTable params, std::vector<ColumnInfo> columns) {
    BnClassifier clf;
    clf.catalog_ = params.catalog();
    clf.structure_ = Structure::from_selection(clf.catalog_, std::vector<std::size_t>(structure.num_vars(), 0));
    if (!(clf.structure_ == structure)) throw std::invalid_argument("classifier: parameters do not match structure");
    if (!clf.structure_.is_acyclic()) throw std::invalid_argument("classifier: structure is cyclic");
    clf.params_ = std::move(params);
    clf.columns_ = std::move(columns);
    return clf;
  }

  const Structure& structure() const noexcept { return structure_; }
  const ParamTable& params() const noexcept { return params_; }
  const std::vector<ColumnInfo>& columns() const noexcept { return columns_; }
  std::size_t num_vars() const noexcept { return structure_.num_vars(); }
  int num_classes() const { return params_.cardinalities()[Dataset::class_index]; }

  /// Training count of class c.
  std::int64_t class_count(int c) const {
    const CountFamily& f = params_.family(Dataset::class_index, 0);
    std::int64_t n = 0;
    for (std::size_t h = 0; h < f.num_configs; ++h) n += f.count(c, h);
    return n;
  }

  /// log P(c, z) for every class c; the class slot of `x` is ignored.
  std::vector<double> class_log_joints(std::span<const int> x) const {
    check_state(x);
    std::vector<int> state(x.begin(), x.end());
    std::vector<double> out(static_cast<std::size_t>(num_classes()));
    for (int c = 0; c < num_classes(); ++c) {
      state[Dataset::class_index] = c;
      out[static_cast<std::size_t>(c)] = log_joint(params_, structure_, state);
    }
    return out;
  }

  /// argmax_c log P(c, z); ties go to the smallest class.
  int predict(std::span<const int> x) const {
    const auto lj = class_log_joints(x);
    return static_cast<int>(std::max_element(lj.begin(), lj.end()) - lj.begin());
  }

  /// log P(c^m, z) - max_{c != c^m} log P(c, z), with c^m read from x.
  double margin(std::span<const int> x) const {
    const auto lj = class_log_joints(x);
    const int own = x[Dataset::class_index];
    if (own < 0 || own >= num_classes()) throw std::out_of_range("margin: class value out of range");
    double rival = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < num_classes(); ++c) {
      if (c != own) rival = std::max(rival, lj[static_cast<std::size_t>(c)]);
    }
    return lj[static_cast<std::size_t>(own)] - rival;
  }

 private:
  static ParentSetCatalog single_set_catalog(const Structure& s) {
    std::vector<std::vector<ParentSet>> sets;
    for (std::size_t i = 0; i < s.num_vars(); ++i) sets.push_back({s.parents(i)});
    return ParentSetCatalog::from_sets(std::move(sets));
  }

  void check_state(std::span<const int> x) const {
    const auto& cards = params_.cardinalities();
    if (x.size() != cards.size()) throw std::invalid_argument("classifier: state has wrong length");
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i == Dataset::class_index) continue;
      if (x[i] < 0 || x[i] >= cards[i]) {
        throw std::out_of_range("classifier: value of variable " + std::to_string(i) + " out of range");
      }
    }
  }

  ParentSetCatalog catalog_;
  Structure structure_;
  ParamTable params_;
  std::vector<ColumnInfo> columns_;
};

inline nlohmann::json column_json(const ColumnInfo& c) {
  nlohmann::json j{{"name", c.name}, {"kind", to_string(c.kind)}, {"source", c.source}};
  if (!c.labels.empty()) j["labels"] = c.labels;
  if (!c.cut_points.empty()) j["cut_points"] = c.cut_points;
  return j;
}

/// Model bundle: structure, columns and CPT counts; reloadable.
inline nlohmann::json model_bundle(const BnClassifier& clf) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : clf.columns()) cols.push_back(column_json(c));
  return nlohmann::json{{"format", "mmbn-model"},
                        {"version", 1},
                        {"columns", cols},
                        {"structure", nlohmann::json{{"parents", clf.structure().all_parents()}}},
                        {"params", clf.params()}};
}

inline BnClassifier load_model_bundle(const nlohmann::json& j) {
  if (j.value("format", "") != "mmbn-model") throw std::invalid_argument("not an mmbn model bundle");
  const auto parents = j.at("structure").at("parents").get<std::vector<ParentSet>>();
  const auto& pj = j.at("params");
  const auto cards = pj.at("cardinalities").get<std::vector<int>>();
  const bool laplace = pj.at("laplace").get<bool>();
  std::vector<std::vector<ParentSet>> sets;
  for (const auto& p : parents) sets.push_back({p});
  ParentSetCatalog catalog = ParentSetCatalog::from_sets(sets);
  std::vector<CountFamily> fams;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    const auto& fj = pj.at("families").at(i);
    CountFamily f = detail::empty_family(i, catalog.set(i, 0), cards);
    const auto counts = fj.at("counts").get<std::vector<std::int64_t>>();
    if (counts.size() != f.counts.size()) throw std::invalid_argument("model bundle: count table size mismatch");
    f.counts = counts;
    for (std::size_t h = 0; h < f.num_configs; ++h) {
      for (int v = 0; v < f.card; ++v) f.totals[h] += f.count(v, h);
    }
    fams.push_back(std::move(f));
  }
  std::vector<ColumnInfo> columns;
  for (const auto& cj : j.at("columns")) {
    ColumnInfo c;
    c.name = cj.at("name").get<std::string>();
    const std::string kind = cj.at("kind").get<std::string>();
    c.kind = kind == "categorical" ? ColumnKind::categorical
             : kind == "discretized" ? ColumnKind::discretized
                                     : ColumnKind::integer;
    if (cj.contains("labels")) c.labels = cj.at("labels").get<std::vector<std::string>>();
    c.source = cj.value("source", columns.size());
    if (cj.contains("cut_points")) c.cut_points = cj.at("cut_points").get<std::vector<double>>();
    columns.push_back(std::move(c));
  }
  ParamTable params = ParamTable::from_families(catalog, cards, std::move(fams), laplace);
  return BnClassifier::from_params(Structure(parents), std::move(params), std::move(columns));
}

// ---------------------------------------------------------------------------
// Evaluation

inline double ci95_half_width(double accuracy, std::size_t n) {
  if (n == 0) return 0.0;
  return 1.96 * std::sqrt(accuracy * (1.0 - accuracy) / static_cast<double>(n));
}

struct FoldReport {
  std::size_t fold = 0;
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  int max_parents = 0;
  double gamma = 0.0;
  double p = 0.0;
  std::string solve_status;
  double gap_percent = 0.0;
};

struct EvalReport {
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  double ci95 = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<double> margins;
  std::vector<int> predictions;
  /// Test samples whose class never occurred in training.
  std::vector<std::size_t> unseen_class_samples;
  std::vector<FoldReport> folds;

  void finalize() {
    accuracy = n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
    ci95 = ci95_half_width(accuracy, n);
  }
};

/// Scores `clf` on `test`. A sample counts as correct only with a strictly
/// positive margin; samples of classes unseen in training count as errors.
inline EvalReport evaluate(const BnClassifier& clf, const Dataset& test) {
  EvalReport rep;
  const auto k = static_cast<std::size_t>(clf.num_classes());
  rep.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t m = 0; m < test.num_samples(); ++m) {
    auto x = test.row(m);
    const int truth = test.label(m);
    const int pred = clf.predict(x);
    const double mg = clf.margin(x);
    const bool unseen = clf.class_count(truth) == 0;
    if (unseen) rep.unseen_class_samples.push_back(m);
    ++rep.n;
    if (mg > 0.0 && !unseen) ++rep.correct;
    ++rep.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
    rep.margins.push_back(mg);
    rep.predictions.push_back(pred);
  }
  rep.finalize();
  return rep;
}

inline void to_json(nlohmann::json& j, const EvalReport& r) {
  auto margins = nlohmann::json::array();
  for (double v : r.margins) {
    if (std::isfinite(v)) {
      margins.push_back(v);
    } else {
      margins.push_back(v > 0 ? "inf" : "-inf");
    }
  }
  j = nlohmann::json{{"n", r.n},
                     {"correct", r.correct},
                     {"accuracy", r.accuracy},
                     {"ci95", r.ci95},
                     {"confusion", r.confusion},
                     {"predictions", r.predictions},
                     {"margins", margins},
                     {"unseen_class_samples", r.unseen_class_samples}};
  if (!r.folds.empty()) {
    auto folds = nlohmann::json::array();
    for (const auto& f : r.folds) {
      folds.push_back({{"fold", f.fold},
                       {"n", f.n},
                       {"correct", f.correct},
                       {"accuracy", f.accuracy},
                       {"max_parents", f.max_parents},
                       {"gamma", f.gamma},
                       {"p", f.p},
                       {"solve_status", f.solve_status},
                       {"gap_percent", std::isfinite(f.gap_percent) ? nlohmann::json(f.gap_percent)
                                                                    : nlohmann::json("inf")}});
    }
    j["folds"] = std::move(folds);
  }
}

}  // namespace mmbn
