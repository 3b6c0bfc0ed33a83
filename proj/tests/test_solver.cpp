#include <gtest/gtest.h>

#include <random>
#include <regex>
#include <sstream>

#include "mmbn/solver.hpp"
#include "oracle.hpp"

using namespace mmbn;

namespace {

struct Case {
  Dataset ds;
  ParentSetCatalog cat;
  CoefficientBank bank;
  MilpModel model;
};

Case make_case(std::mt19937_64& rng, ScoreKind kind, std::size_t n, int classes, std::size_t m, int k,
               double gamma = gamma_from_p(0.9)) {
  Dataset ds = oracle::random_dataset(rng, n, classes, 3, m);
  const CatalogMode mode = kind == ScoreKind::mdl ? CatalogMode::generative : CatalogMode::margin;
  ParentSetCatalog cat = ParentSetCatalog::enumerate(n, k, mode);
  CoefficientBank bank;
  if (kind == ScoreKind::sm) bank = build_sm(ds, cat, ParamTable::fit(ds, cat, true), gamma);
  if (kind == ScoreKind::sbm) bank = build_sbm(ds, cat, OvaParamTable::fit(ds, cat, true), gamma);
  if (kind == ScoreKind::mdl) bank = build_mdl(ds, cat);
  MilpModel model = build_milp(bank, cat, 1.0);
  return {std::move(ds), std::move(cat), std::move(bank), std::move(model)};
}

double exhaustive(const Case& c, int k) {
  const oracle::Raw raw = oracle::raw_of(c.ds);
  const int n = static_cast<int>(c.ds.num_vars());
  const double gamma = c.bank.gamma();
  switch (c.bank.kind()) {
    case ScoreKind::sm: return oracle::best_dag_score(n, k, [&](const oracle::Graph& g) { return oracle::sm_score(raw, g, gamma); });
    case ScoreKind::sbm: return oracle::best_dag_score(n, k, [&](const oracle::Graph& g) { return oracle::sbm_score(raw, g, gamma); });
    case ScoreKind::mdl: return oracle::best_dag_score(n, k, [&](const oracle::Graph& g) { return oracle::mdl_score(raw, g); });
  }
  return 0.0;
}

SolverConfig quiet(double time_limit = 60.0) {
  SolverConfig cfg;
  cfg.time_limit = time_limit;
  return cfg;
}

void expect_consistent(const Case& c, const SolveResult& r, double gap_tol = 1e-6) {
  ASSERT_TRUE(r.incumbent.has_value());
  EXPECT_TRUE(r.incumbent->is_acyclic());
  EXPECT_NEAR(score_structure(c.bank, r.incumbent->eta(c.cat)), r.objective, 1e-8);
  EXPECT_LE(r.objective, r.upper_bound + 1e-7 * std::max(1.0, std::abs(r.upper_bound)));
  EXPECT_EQ(r.gap_percent, gap_percent(r.objective, r.upper_bound, true));
  EXPECT_LE(r.max_bound_excess, 1e-7);
  if (r.status == SolveStatus::optimal) EXPECT_LE(r.gap_percent, gap_tol);
}

}  // namespace

TEST(Gap, Formula) {
  EXPECT_DOUBLE_EQ(gap_percent(90.0, 100.0, true), 10.0);
  EXPECT_EQ(gap_percent(5.0, 5.0, true), 0.0);
  EXPECT_TRUE(std::isinf(gap_percent(0.0, 100.0, false)));
  EXPECT_TRUE(std::isinf(gap_percent(-3.0, -1.0, true)));
  EXPECT_TRUE(std::isinf(gap_percent(-3.0, 0.0, true)));
  EXPECT_EQ(gap_percent(-2.0, -2.0, true), 0.0);
}

TEST(SolveLp, SeparableMdlRootIsIntegral) {
  std::mt19937_64 rng(1);
  int found = 0;
  for (int trial = 0; trial < 200 && found < 10; ++trial) {
    const Case c = make_case(rng, ScoreKind::mdl, 4, 2, 20, 2);
    std::vector<std::size_t> best(4, 0);
    double sum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t k = 1; k < c.cat.num_sets(i); ++k) {
        if (c.bank.omega()[c.cat.flat(i, k)] > c.bank.omega()[c.cat.flat(i, best[i])]) best[i] = k;
      }
      sum += c.bank.omega()[c.cat.flat(i, best[i])];
    }
    if (!Structure::from_selection(c.cat, best).is_acyclic()) continue;
    ++found;
    const LpSolution sol = solve_lp(c.model, {});
    ASSERT_EQ(sol.status, LpStatus::optimal);
    EXPECT_NEAR(sol.objective, sum, 1e-9);
    for (std::size_t p = 0; p < c.cat.size(); ++p) {
      EXPECT_NEAR(std::min(sol.x[p], 1.0 - sol.x[p]), 0.0, 1e-9);
    }
    const SolveResult r = branch_and_bound(c.model, quiet());
    EXPECT_EQ(r.nodes_explored, 1u);
    EXPECT_EQ(r.status, SolveStatus::optimal);
    EXPECT_NEAR(r.objective, sum, 1e-9);
  }
  EXPECT_GT(found, 0);
}

TEST(SolveLp, BlockFixedToZeroIsInfeasible) {
  std::mt19937_64 rng(2);
  const Case c = make_case(rng, ScoreKind::sm, 3, 2, 10, 1);
  std::vector<std::int8_t> fix(c.cat.size(), -1);
  for (std::size_t k = 0; k < c.cat.num_sets(1); ++k) fix[c.cat.flat(1, k)] = 0;
  EXPECT_EQ(solve_lp(c.model, fix).status, LpStatus::infeasible);
}

TEST(SolveLp, FixToOneZeroesTheBlock) {
  std::mt19937_64 rng(3);
  const Case c = make_case(rng, ScoreKind::sm, 3, 2, 10, 2);
  std::vector<std::int8_t> fix(c.cat.size(), -1);
  fix[c.cat.flat(0, 1)] = 1;
  const LpSolution sol = solve_lp(c.model, fix);
  ASSERT_EQ(sol.status, LpStatus::optimal);
  for (std::size_t k = 0; k < c.cat.num_sets(0); ++k) EXPECT_EQ(sol.x[c.cat.flat(0, k)], k == 1 ? 1.0 : 0.0);
}

TEST(SolveLp, RelaxationBoundsTheOptimum) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 24; ++trial) {
    const ScoreKind kind = trial % 3 == 0 ? ScoreKind::sm : trial % 3 == 1 ? ScoreKind::sbm : ScoreKind::mdl;
    const int k = 1 + trial % 2;
    const Case c = make_case(rng, kind, 3 + trial % 2, 2 + trial % 2, 12, k);
    const LpSolution sol = solve_lp(c.model, {});
    ASSERT_EQ(sol.status, LpStatus::optimal);
    EXPECT_LE(c.model.lp.max_violation(sol.x), 1e-7);
    EXPECT_GE(sol.objective, exhaustive(c, k) - 1e-9);
  }
}

TEST(SolveLp, Deterministic) {
  std::mt19937_64 rng(5);
  const Case c = make_case(rng, ScoreKind::sm, 4, 3, 15, 2);
  const LpSolution a = solve_lp(c.model, {});
  const LpSolution b = solve_lp(c.model, {});
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.objective, b.objective);
}

TEST(RoundIncumbent, IntegralSolutionUnchanged) {
  std::mt19937_64 rng(6);
  const Case c = make_case(rng, ScoreKind::mdl, 4, 2, 10, 2);
  const Structure s(std::vector<ParentSet>{{}, {0}, {0, 1}, {2}});
  LpSolution sol;
  sol.status = LpStatus::optimal;
  sol.x = s.eta(c.cat);
  sol.x.resize(c.model.lp.num_cols(), 0.0);
  const auto r = round_incumbent(sol, c.cat);
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(*r, s);
}

TEST(RoundIncumbent, TwoCycleDemotesWeakerSide) {
  const auto cat = ParentSetCatalog::enumerate(3, 1, CatalogMode::generative);
  LpSolution sol;
  sol.status = LpStatus::optimal;
  sol.x.assign(cat.size(), 0.0);
  sol.x[cat.flat(0, 0)] = 1.0;
  sol.x[cat.flat(1, 0)] = 0.3;
  sol.x[cat.flat(1, *cat.find(1, {2}))] = 0.7;
  sol.x[cat.flat(2, 0)] = 0.4;
  sol.x[cat.flat(2, *cat.find(2, {1}))] = 0.6;
  const auto r = round_incumbent(sol, cat);
  ASSERT_TRUE(r.has_value());
  EXPECT_TRUE(r->is_acyclic());
  EXPECT_EQ(r->parents(1), (ParentSet{2}));
  EXPECT_TRUE(r->parents(2).empty());
}

TEST(RoundIncumbent, NonOptimalGivesNothing) {
  const auto cat = ParentSetCatalog::enumerate(3, 1, CatalogMode::generative);
  LpSolution sol;
  sol.status = LpStatus::infeasible;
  EXPECT_FALSE(round_incumbent(sol, cat).has_value());
}

TEST(RoundIncumbent, NeverBeatsTheOptimum) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 15; ++trial) {
    const ScoreKind kind = trial % 3 == 0 ? ScoreKind::sm : trial % 3 == 1 ? ScoreKind::sbm : ScoreKind::mdl;
    const Case c = make_case(rng, kind, 4, 2 + trial % 2, 12, 2);
    const auto r = round_incumbent(solve_lp(c.model, {}), c.cat);
    ASSERT_TRUE(r.has_value());
    EXPECT_TRUE(r->is_acyclic());
    EXPECT_LE(score_structure(c.bank, r->eta(c.cat)), exhaustive(c, 2) + 1e-9);
  }
}

TEST(BranchAndBound, ToyInstanceMatchesEnumeration) {
  // N=3, K=1 margin catalog: 3 x 2 x 2 selections.
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Case c = make_case(rng, ScoreKind::sm, 3, 2 + trial % 2, 10, 1, gamma_from_p(0.7));
    const SolveResult r = branch_and_bound(c.model, quiet());
    ASSERT_EQ(r.status, SolveStatus::optimal);
    expect_consistent(c, r);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t d = 0; d < 2; ++d) {
          const Structure s = Structure::from_selection(c.cat, {a, b, d});
          if (s.is_acyclic()) best = std::max(best, score_structure(c.bank, s.eta(c.cat)));
        }
      }
    }
    EXPECT_NEAR(r.objective, best, 1e-8);
    EXPECT_NEAR(r.objective, exhaustive(c, 1), 1e-8);
  }
}

TEST(BranchAndBound, ExactOnSmallInstances) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 36; ++trial) {
    const ScoreKind kind = trial % 3 == 0 ? ScoreKind::sm : trial % 3 == 1 ? ScoreKind::sbm : ScoreKind::mdl;
    const std::size_t n = 2 + trial % 3;
    const int k = std::min<int>(1 + (trial / 3) % 2, static_cast<int>(n) - 1);
    const Case c = make_case(rng, kind, n, 2 + trial % 3, 5 + rng() % 26, k, gamma_from_p(0.6 + 0.1 * (trial % 4)));
    const SolveResult r = branch_and_bound(c.model, quiet());
    ASSERT_EQ(r.status, SolveStatus::optimal) << "trial " << trial;
    expect_consistent(c, r);
    EXPECT_NEAR(r.objective, exhaustive(c, k), 1e-8) << "trial " << trial;
    EXPECT_NEAR(r.upper_bound, r.objective, 1e-8 * std::max(1.0, std::abs(r.objective)));
  }
}

TEST(BranchAndBound, DeterministicSingleThread) {
  std::mt19937_64 rng(10);
  const Case c = make_case(rng, ScoreKind::sm, 5, 3, 30, 2);
  const SolveResult a = branch_and_bound(c.model, quiet());
  const SolveResult b = branch_and_bound(c.model, quiet());
  EXPECT_EQ(a.nodes_explored, b.nodes_explored);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.upper_bound, b.upper_bound);
  ASSERT_TRUE(a.incumbent && b.incumbent);
  EXPECT_EQ(*a.incumbent, *b.incumbent);
}

TEST(BranchAndBound, AnytimeTraceIsMonotone) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Case c = make_case(rng, ScoreKind::sm, 5, 3, 40, 2);
    const SolveResult r = branch_and_bound(c.model, quiet());
    expect_consistent(c, r);
    ASSERT_FALSE(r.trace.empty());
    for (std::size_t t = 1; t < r.trace.size(); ++t) {
      EXPECT_GT(r.trace[t].incumbent, r.trace[t - 1].incumbent);
      EXPECT_LE(r.trace[t].bound, r.trace[t - 1].bound + 1e-12);
      EXPECT_GE(r.trace[t].node, r.trace[t - 1].node);
    }
    EXPECT_LE(r.upper_bound, r.trace.back().bound + 1e-12);
    EXPECT_LE(r.upper_bound, r.root_bound + 1e-7);
  }
}

TEST(BranchAndBound, ConfigurationsAgreeOnTheOptimum) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 6; ++trial) {
    const Case c = make_case(rng, trial % 2 ? ScoreKind::sbm : ScoreKind::sm, 4, 3, 20, 2);
    const SolveResult base = branch_and_bound(c.model, quiet());
    ASSERT_EQ(base.status, SolveStatus::optimal);

    SolverConfig depth = quiet();
    depth.node_order = NodeOrder::depth_first;
    SolverConfig first = quiet();
    first.branch_rule = BranchRule::first_fractional;
    SolverConfig cold = quiet();
    cold.warm_start = false;
    SolverConfig threaded = quiet();
    threaded.threads = 4;
    for (const SolverConfig& cfg : {depth, first, cold, threaded}) {
      const SolveResult r = branch_and_bound(c.model, cfg);
      ASSERT_EQ(r.status, SolveStatus::optimal);
      expect_consistent(c, r);
      EXPECT_NEAR(r.objective, base.objective, 1e-8);
    }
  }
}

TEST(BranchAndBound, NodeLimitGivesAnytimeResult) {
  std::mt19937_64 rng(13);
  const Case c = make_case(rng, ScoreKind::sm, 6, 3, 60, 2);
  SolverConfig cfg = quiet();
  cfg.max_nodes = 3;
  const SolveResult r = branch_and_bound(c.model, cfg);
  if (r.status == SolveStatus::optimal) GTEST_SKIP() << "instance solved within the node limit";
  ASSERT_EQ(r.status, SolveStatus::feasible_timeout);
  expect_consistent(c, r);
  EXPECT_LE(r.nodes_explored, 3u);
  EXPECT_GT(r.gap_percent, 0.0);
  const SolveResult full = branch_and_bound(c.model, quiet());
  EXPECT_LE(r.objective, full.objective + 1e-9);
  EXPECT_GE(r.upper_bound, full.objective - 1e-7);
}

TEST(BranchAndBound, ZeroTimeLimitHasNoIncumbent) {
  std::mt19937_64 rng(14);
  const Case c = make_case(rng, ScoreKind::sm, 4, 2, 20, 2);
  const SolveResult r = branch_and_bound(c.model, quiet(0.0));
  EXPECT_EQ(r.status, SolveStatus::no_incumbent);
  EXPECT_FALSE(r.incumbent.has_value());
  EXPECT_TRUE(std::isinf(r.gap_percent));
}

TEST(BranchAndBound, GapToleranceStopsEarly) {
  std::mt19937_64 rng(15);
  const Case c = make_case(rng, ScoreKind::sm, 5, 3, 40, 2);
  SolverConfig loose = quiet();
  loose.gap_tol = 50.0;
  const SolveResult r = branch_and_bound(c.model, loose);
  ASSERT_EQ(r.status, SolveStatus::optimal);
  expect_consistent(c, r, 50.0);
  EXPECT_LE(r.nodes_explored, branch_and_bound(c.model, quiet()).nodes_explored);
}

TEST(BranchAndBound, ProgressLines) {
  std::mt19937_64 rng(16);
  const Case c = make_case(rng, ScoreKind::sm, 4, 2, 20, 2);
  std::ostringstream log;
  SolverConfig cfg = quiet();
  cfg.log = &log;
  cfg.log_interval = 0.0;
  branch_and_bound(c.model, cfg);
  const std::regex line(R"(node=\d+ z=\S+ zbar=\S+ gap=\S+% open=\d+ t=\d+\.\d)");
  std::istringstream in(log.str());
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l); ++lines) EXPECT_TRUE(std::regex_match(l, line)) << l;
  EXPECT_GT(lines, 0u);
}

TEST(SolveResultJson, TimingOnlyOnRequest) {
  std::mt19937_64 rng(17);
  const Case c = make_case(rng, ScoreKind::mdl, 3, 2, 10, 1);
  const SolveResult r = branch_and_bound(c.model, quiet());
  nlohmann::json plain, timed;
  to_json(plain, r, false);
  to_json(timed, r, true);
  EXPECT_FALSE(plain.contains("wall_time"));
  EXPECT_TRUE(timed.contains("wall_time"));
  EXPECT_EQ(plain.at("status"), "optimal");
  EXPECT_EQ(plain.at("incumbent").at("parents").get<std::vector<ParentSet>>(), r.incumbent->all_parents());

  SolveResult none;
  nlohmann::json j;
  to_json(j, none, false);
  EXPECT_EQ(j.at("gap_percent"), "inf");
  EXPECT_TRUE(j.at("incumbent").is_null());
}
