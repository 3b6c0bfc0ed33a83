#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "mmbn/milp.hpp"
#include "oracle.hpp"

using namespace mmbn;

namespace {

struct Instance {
  Dataset ds;
  ParentSetCatalog margin_cat;
  ParentSetCatalog gen_cat;
};

Instance make_instance(std::mt19937_64& rng, std::size_t n, int classes, std::size_t m, int k) {
  Instance in{oracle::random_dataset(rng, n, classes, 3, m), {}, {}};
  in.margin_cat = ParentSetCatalog::enumerate(n, k, CatalogMode::margin);
  in.gen_cat = ParentSetCatalog::enumerate(n, k, CatalogMode::generative);
  return in;
}

MilpModel sm_model(const Instance& in, double gamma, double delta = 1.0) {
  return build_milp(build_sm(in.ds, in.margin_cat, ParamTable::fit(in.ds, in.margin_cat, true), gamma),
                    in.margin_cat, delta);
}

MilpModel sbm_model(const Instance& in, double gamma, double delta = 1.0) {
  return build_milp(build_sbm(in.ds, in.margin_cat, OvaParamTable::fit(in.ds, in.margin_cat, true), gamma),
                    in.margin_cat, delta);
}

MilpModel mdl_model(const Instance& in, double delta = 1.0) {
  return build_milp(build_mdl(in.ds, in.gen_cat), in.gen_cat, delta);
}

// Order rows only feasible with eta fixed: LP check on the mdl model.
bool order_rows_feasible(const MilpModel& model, const std::vector<double>& eta) {
  std::vector<double> lo = model.lp.lower, hi = model.lp.upper;
  for (std::size_t p = 0; p < eta.size(); ++p) lo[p] = hi[p] = eta[p];
  return DualSimplex(model.lp).solve(lo, hi).status == LpStatus::optimal;
}

// Every selection vector of `cat`, by odometer.
template <typename F>
void for_each_selection(const ParentSetCatalog& cat, F&& f) {
  std::vector<std::size_t> sel(cat.num_vars(), 0);
  for (;;) {
    f(sel);
    std::size_t i = 0;
    while (i < sel.size() && ++sel[i] == cat.num_sets(i)) sel[i++] = 0;
    if (i == sel.size()) return;
  }
}

}  // namespace

TEST(BuildMilp, SmSizes) {
  std::mt19937_64 rng(1);
  const Instance in = make_instance(rng, 3, 2, 5, 1);
  const MilpModel model = sm_model(in, 1.0);
  EXPECT_EQ(model.num_margin_rows, 5u);
  EXPECT_EQ(model.num_selection_rows, 3u);
  EXPECT_EQ(model.num_order_rows, 6u);
  EXPECT_EQ(model.lp.num_rows(), 14u);
  EXPECT_EQ(model.num_tau, 5u);
  for (std::size_t m = 0; m < 5; ++m) {
    EXPECT_EQ(model.lp.upper[model.tau_col(m)], 1.0);
    EXPECT_TRUE(std::isfinite(model.lp.lower[model.tau_col(m)]));
    EXPECT_EQ(model.lp.objective[model.tau_col(m)], 1.0);
  }
  for (std::size_t p = 0; p < model.num_eta; ++p) {
    EXPECT_TRUE(model.lp.integer[p]);
    EXPECT_EQ(model.lp.lower[p], 0.0);
    EXPECT_EQ(model.lp.upper[p], 1.0);
  }
}

TEST(BuildMilp, SbmSizesBinaryClass) {
  std::mt19937_64 rng(2);
  const Instance in = make_instance(rng, 3, 2, 5, 1);
  const MilpModel model = sbm_model(in, 1.0);
  EXPECT_EQ(model.num_margin_rows, 5u);
  EXPECT_EQ(model.kind, ScoreKind::sbm);
}

TEST(BuildMilp, MdlHasNoMarginPart) {
  std::mt19937_64 rng(3);
  const Instance in = make_instance(rng, 3, 2, 5, 1);
  const MilpModel model = mdl_model(in);
  const auto bank = build_mdl(in.ds, in.gen_cat);
  EXPECT_EQ(model.num_tau, 0u);
  EXPECT_EQ(model.num_margin_rows, 0u);
  EXPECT_EQ(model.lp.num_rows(), 3u + 6u);
  for (std::size_t p = 0; p < model.num_eta; ++p) EXPECT_EQ(model.lp.objective[p], bank.omega()[p]);
}

TEST(BuildMilp, SizeFormulas) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng() % 4;
    const int classes = 2 + static_cast<int>(rng() % 3);
    const std::size_t m = 3 + rng() % 10;
    const int k = static_cast<int>(rng() % n);
    const Instance in = make_instance(rng, n, classes, m, k);
    const std::size_t order = n * n - n;
    const MilpModel sm = sm_model(in, 0.5);
    EXPECT_EQ(sm.lp.num_rows(), m * static_cast<std::size_t>(classes - 1) + n + order);
    EXPECT_EQ(sm.lp.num_cols(), in.margin_cat.size() + m + n);
    const MilpModel sbm = sbm_model(in, 0.5);
    EXPECT_EQ(sbm.lp.num_rows(), m + n + order);
    EXPECT_EQ(sbm.lp.num_cols(), in.margin_cat.size() + m + n);
    const MilpModel mdl = mdl_model(in);
    EXPECT_EQ(mdl.lp.num_rows(), n + order);
    EXPECT_EQ(mdl.lp.num_cols(), in.gen_cat.size() + n);
  }
}

TEST(BuildMilp, RejectsBadDelta) {
  std::mt19937_64 rng(5);
  const Instance in = make_instance(rng, 3, 2, 5, 1);
  const auto bank = build_mdl(in.ds, in.gen_cat);
  EXPECT_THROW(build_milp(bank, in.gen_cat, 0.0), std::invalid_argument);
  EXPECT_THROW(build_milp(bank, in.gen_cat, -1.0), std::invalid_argument);
  EXPECT_THROW(build_milp(bank, in.margin_cat, 1.0), std::invalid_argument);
}

TEST(BuildMilp, OrderRowsMatchSubstitutedForm) {
  std::mt19937_64 rng(6);
  const Instance in = make_instance(rng, 4, 3, 8, 2);
  for (double delta : {1.0, 7.5}) {
    const MilpModel model = mdl_model(in, delta);
    const auto& cat = model.catalog;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> x(model.lp.num_cols());
      for (auto& v : x) v = u(rng);
      for (std::size_t i = 0; i < 4; ++i) x[model.order_col(i)] = delta * u(rng);
      std::size_t r = model.num_margin_rows + model.num_selection_rows;
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
          if (i == j) continue;
          double a = 0.0;
          for (std::size_t k = 0; k < cat.num_sets(j); ++k) {
            const ParentSet& s = cat.set(j, k);
            if (std::count(s.begin(), s.end(), static_cast<int>(i))) a += x[cat.flat(j, k)];
          }
          const auto& row = model.lp.rows[r];
          EXPECT_EQ(row.sense, RowSense::ge);
          EXPECT_NEAR(model.lp.row_activity(r, x) - row.rhs,
                      (1.0 - a) * 2.0 * delta + x[model.order_col(j)] - x[model.order_col(i)] - delta / 4.0, 1e-12);
          ++r;
        }
      }
    }
  }
}

TEST(BuildMilp, IntegralPointScoresItsStructure) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const Instance in = make_instance(rng, 4, 2 + trial % 3, 12, 2);
    const double gamma = 0.7;
    const auto bank = build_sm(in.ds, in.margin_cat, ParamTable::fit(in.ds, in.margin_cat, true), gamma);
    const MilpModel model = build_milp(bank, in.margin_cat, 1.0);
    std::vector<std::size_t> sel(4);
    for (std::size_t i = 0; i < 4; ++i) sel[i] = rng() % in.margin_cat.num_sets(i);
    const Structure s = Structure::from_selection(in.margin_cat, sel);
    if (!s.is_acyclic()) continue;
    const auto eta = s.eta(in.margin_cat);
    std::vector<double> x(model.lp.num_cols(), 0.0);
    std::copy(eta.begin(), eta.end(), x.begin());
    const auto lm = bank.log_margins(eta);
    for (std::size_t m = 0; m < lm.size(); ++m) x[model.tau_col(m)] = std::min(gamma, lm[m]);
    const auto o = certificate_from_dag(s, 1.0);
    for (std::size_t i = 0; i < 4; ++i) x[model.order_col(i)] = o[i];
    EXPECT_LE(model.lp.max_violation(x), 1e-9);
    double obj = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) obj += model.lp.objective[j] * x[j];
    EXPECT_NEAR(obj, score_structure(bank, eta), 1e-9);
  }
}

TEST(OrderCertificate, AbsentEdgeAlwaysHolds) {
  const auto cat = ParentSetCatalog::enumerate(3, 1, CatalogMode::generative);
  const auto eta = Structure::empty(cat).eta(cat);
  const std::vector<double> extremes[] = {{0, 0, 0}, {1, 0, 1}, {0, 1, 0.5}, {1, 1, 1}};
  for (const auto& o : extremes) EXPECT_TRUE(check_order_certificate(cat, eta, o, 1.0));
}

TEST(OrderCertificate, PresentEdgeNeedsStrictGap) {
  const auto cat = ParentSetCatalog::enumerate(3, 1, CatalogMode::generative);
  // Edge X0 -> X1 only.
  const Structure s = Structure::from_selection(cat, {0, *cat.find(1, {0}), 0});
  const auto eta = s.eta(cat);
  const double delta = 3.0;
  EXPECT_TRUE(check_order_certificate(cat, eta, std::vector<double>{0.0, 1.0, 0.0}, delta));
  EXPECT_FALSE(check_order_certificate(cat, eta, std::vector<double>{0.0, 0.99, 0.0}, delta));
  EXPECT_FALSE(check_order_certificate(cat, eta, std::vector<double>{1.0, 1.0, 0.0}, delta));
  EXPECT_FALSE(check_order_certificate(cat, eta, std::vector<double>{0.0, 3.5, 0.0}, delta));
}

TEST(CertificateFromDag, EmptyAndChain) {
  const auto cat = ParentSetCatalog::enumerate(3, 1, CatalogMode::generative);
  const auto o = certificate_from_dag(Structure::empty(cat), 3.0);
  EXPECT_EQ(o, (std::vector<double>{0.0, 1.0, 2.0}));
  const Structure chain(std::vector<ParentSet>{{}, {0}, {1}});
  const auto oc = certificate_from_dag(chain, 1.0);
  EXPECT_NEAR(oc[1] - oc[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(oc[2] - oc[1], 1.0 / 3.0, 1e-15);
  EXPECT_TRUE(check_order_certificate(cat, chain.eta(cat), oc, 1.0));
  // Ties between ready nodes go to the smaller index.
  const Structure rev(std::vector<ParentSet>{{2}, {}, {}});
  EXPECT_EQ(certificate_from_dag(rev, 3.0), (std::vector<double>{2.0, 0.0, 1.0}));
}

TEST(CertificateFromDag, CyclicRejected) {
  const Structure cyc(std::vector<ParentSet>{{1}, {0}});
  EXPECT_THROW(certificate_from_dag(cyc, 1.0), std::invalid_argument);
}

TEST(Proposition, AcyclicIffOrderRowsFeasible) {
  std::mt19937_64 rng(8);
  for (std::size_t n : {2u, 3u, 4u}) {
    for (int k = 1; k <= std::min<int>(2, static_cast<int>(n) - 1); ++k) {
      const Instance in = make_instance(rng, n, 2, 4, k);
      std::map<double, MilpModel> models;
      for (double delta : {1.0, 10.0, 1000.0}) models.emplace(delta, mdl_model(in, delta));
      std::size_t dags = 0, cyclic = 0;
      for_each_selection(in.gen_cat, [&](const std::vector<std::size_t>& sel) {
        const Structure s = Structure::from_selection(in.gen_cat, sel);
        const auto eta = s.eta(in.gen_cat);
        const bool acyclic = s.is_acyclic();
        (acyclic ? dags : cyclic)++;
        for (auto& [delta, model] : models) {
          if (acyclic) {
            EXPECT_TRUE(check_order_certificate(in.gen_cat, eta, certificate_from_dag(s, delta), delta));
          }
          EXPECT_EQ(order_rows_feasible(model, eta), acyclic) << "n=" << n << " k=" << k << " delta=" << delta;
        }
        // Difference-constraint oracle agrees.
        std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
        for (std::size_t j = 0; j < n; ++j) {
          for (int p : s.parents(j)) w[static_cast<std::size_t>(p)][j] = 1.0;
        }
        for (std::size_t a = 0; a < n; ++a) {
          for (std::size_t b = 0; b < n; ++b) w[a][b] = 1.0 / static_cast<double>(n) - 2.0 + 2.0 * w[a][b];
        }
        EXPECT_EQ(oracle::difference_system_feasible(w, 1.0), acyclic);
      });
      EXPECT_GT(dags, 0u);
      EXPECT_GT(cyclic, 0u);
    }
  }
}

TEST(WriteMps, ParsesBackToTheSameProgram) {
  std::mt19937_64 rng(9);
  const Instance in = make_instance(rng, 3, 3, 6, 2);
  const MilpModel model = sm_model(in, gamma_from_p(0.9));
  std::ostringstream out;
  write_mps(model, out);
  const std::string text = out.str();
  EXPECT_NE(text.find("OBJSENSE"), std::string::npos);
  EXPECT_NE(text.find("'INTORG'"), std::string::npos);
  EXPECT_NE(text.find("'INTEND'"), std::string::npos);
  EXPECT_EQ(text.substr(text.size() - 7), "ENDATA\n");

  std::istringstream in_mps(text);
  std::string line, section;
  std::map<std::string, char> sense;
  std::map<std::pair<std::string, std::string>, double> coef;
  std::map<std::string, double> rhs, up, lo;
  std::set<std::string> binaries, integers;
  bool in_int = false;
  while (std::getline(in_mps, line)) {
    if (line.empty()) continue;
    if (line[0] != ' ') {
      std::istringstream ls(line);
      ls >> section;
      continue;
    }
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (section == "ROWS") {
      sense[tok[1]] = tok[0][0];
    } else if (section == "COLUMNS") {
      if (tok.size() == 3 && tok[1] == "'MARKER'") {
        in_int = tok[2] == "'INTORG'";
        continue;
      }
      if (in_int) integers.insert(tok[0]);
      coef[{tok[0], tok[1]}] = std::stod(tok[2]);
    } else if (section == "RHS") {
      rhs[tok[1]] = std::stod(tok[2]);
    } else if (section == "BOUNDS") {
      if (tok[0] == "BV") binaries.insert(tok[2]);
      if (tok[0] == "UP") up[tok[2]] = std::stod(tok[3]);
      if (tok[0] == "LO") lo[tok[2]] = std::stod(tok[3]);
    }
  }
  const LinearProgram& lp = model.lp;
  EXPECT_EQ(sense.size(), lp.num_rows() + 1);
  std::size_t nonzeros = 0;
  for (const auto& row : lp.rows) {
    const char want = row.sense == RowSense::le ? 'L' : row.sense == RowSense::ge ? 'G' : 'E';
    EXPECT_EQ(sense[row.name], want);
    EXPECT_NEAR(rhs.count(row.name) ? rhs[row.name] : 0.0, row.rhs, 1e-12 * std::max(1.0, std::abs(row.rhs)));
    for (std::size_t t = 0; t < row.index.size(); ++t) {
      const double got = coef[{lp.column_names[row.index[t]], row.name}];
      EXPECT_NEAR(got, row.value[t], 1e-12 * std::max(1.0, std::abs(row.value[t])));
      ++nonzeros;
    }
  }
  std::size_t listed = 0;
  for (const auto& [key, v] : coef) listed += key.second != "obj";
  EXPECT_EQ(listed, nonzeros);
  for (std::size_t j = 0; j < lp.num_cols(); ++j) {
    const std::string& c = lp.column_names[j];
    EXPECT_EQ(integers.count(c) == 1, static_cast<bool>(lp.integer[j]));
    if (lp.integer[j]) {
      EXPECT_TRUE(binaries.count(c));
    } else {
      EXPECT_NEAR(up[c], lp.upper[j], 1e-12 * std::max(1.0, std::abs(lp.upper[j])));
      EXPECT_NEAR(lo.count(c) ? lo[c] : 0.0, lp.lower[j], 1e-12 * std::max(1.0, std::abs(lp.lower[j])));
    }
    const double obj = coef.count({c, "obj"}) ? coef[{c, "obj"}] : 0.0;
    EXPECT_NEAR(obj, lp.objective[j], 1e-12);
  }
}
