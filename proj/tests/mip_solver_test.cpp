#include "gridshed/mip_solver.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gridshed/formulation.hpp"
#include "test_support.hpp"

using namespace gridshed;
using gridshed::testing::case_path;

namespace {

BnbConfig tight() {
  BnbConfig c;
  c.gap = 1e-9;
  c.time_limit_s = 120.0;
  return c;
}

// Best objective over every 0/1 assignment of the integer columns.
struct Enumerated {
  bool any = false;
  double best = -kInf;
};

Enumerated enumerate(const ConicMipInstance& inst) {
  const auto ints = inst.integer_columns();
  OuterApproximationSolver node;
  Enumerated out;
  std::vector<double> a(ints.size());
  for (std::size_t mask = 0; mask < (std::size_t{1} << ints.size()); ++mask) {
    for (std::size_t k = 0; k < ints.size(); ++k) a[k] = static_cast<double>((mask >> k) & 1u);
    const auto r = fix_and_resolve(inst, a, node);
    if (r.status != SolveStatus::kOptimal) continue;
    out.any = true;
    out.best = std::max(out.best, r.objective);
  }
  return out;
}

ConicMipInstance random_knapsack(std::mt19937_64& rng, int n, int m) {
  std::uniform_real_distribution<double> w(0.1, 1.0), v(-0.2, 1.0);
  ConicMipInstance inst;
  inst.name = "knapsack";
  for (int j = 0; j < n; ++j) {
    inst.objective[inst.add_column("b" + std::to_string(j), 0.0, 1.0, true)] = v(rng);
  }
  // A continuous column linked to the first two binaries.
  inst.objective[inst.add_column("c", 0.0, 2.0)] = 0.3;
  for (int i = 0; i < m; ++i) {
    LinearRow r{"cap" + std::to_string(i), {}, RowSense::kLessEqual, 0.4 * n * 0.55};
    for (int j = 0; j < n; ++j) r.terms.push_back({j, w(rng)});
    inst.add_rows({r});
  }
  inst.add_rows({LinearRow{"link", {{n, 1.0}, {0, -1.0}, {1, -1.0}}, RowSense::kLessEqual, 0.0}});
  return inst;
}

}  // namespace

TEST(RelativeGap, Definition) {
  EXPECT_NEAR(relative_gap(1.0, 1.1), 0.1, 1e-15);
  EXPECT_NEAR(relative_gap(-2.0, -1.0), 0.5, 1e-15);
  EXPECT_NEAR(relative_gap(0.0, 1e-10), 0.1, 1e-12);
  EXPECT_EQ(relative_gap(0.3, 0.3), 0.0);
}

TEST(BranchAndBound, RejectsBadConfigurations) {
  std::mt19937_64 rng(1);
  const ConicMipInstance inst = random_knapsack(rng, 3, 1);
  for (auto mutate : std::vector<void (*)(BnbConfig&)>{
           [](BnbConfig& c) { c.gap = -1.0; }, [](BnbConfig& c) { c.time_limit_s = 0.0; },
           [](BnbConfig& c) { c.feasibility_tol = 0.0; }, [](BnbConfig& c) { c.integrality_tol = 0.6; }}) {
    BnbConfig c;
    mutate(c);
    EXPECT_FALSE(validate(c).empty());
    EXPECT_EQ(solve(inst, c).status, SolveStatus::kError);
  }
}

TEST(BranchAndBound, ContinuousInstanceIsOneNode) {
  ConicMipInstance inst;
  inst.add_column("x", 0.0, 4.0);
  inst.add_column("y", 0.0, 4.0);
  inst.objective = {1.0, 1.0};
  inst.add_rows({LinearRow{"r", {{0, 1.0}, {1, 2.0}}, RowSense::kLessEqual, 4.0}});
  const auto r = solve(inst, tight());
  ASSERT_EQ(r.status, SolveStatus::kOptimal);
  EXPECT_EQ(r.nodes, 1);
  EXPECT_NEAR(r.objective, 4.0, 1e-9);
  EXPECT_NEAR(r.best_bound, 4.0, 1e-9);
}

TEST(BranchAndBound, IntegerInfeasibilityIsDetected) {
  ConicMipInstance inst;
  inst.add_column("a", 0.0, 1.0, true);
  inst.add_column("b", 0.0, 1.0, true);
  inst.objective = {1.0, 1.0};
  // a + b = 1.5 has LP solutions but no integer ones.
  inst.add_rows({LinearRow{"r", {{0, 1.0}, {1, 1.0}}, RowSense::kEqual, 1.5}});
  const auto r = solve(inst, tight());
  EXPECT_EQ(r.status, SolveStatus::kInfeasible);
  EXPECT_FALSE(r.has_solution());
}

TEST(BranchAndBound, RandomBinaryProgramsMatchEnumeration) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    const auto inst = random_knapsack(rng, 8, 2);
    const auto oracle = enumerate(inst);
    ASSERT_TRUE(oracle.any);
    const auto r = solve(inst, tight());
    ASSERT_EQ(r.status, SolveStatus::kOptimal) << trial;
    EXPECT_NEAR(r.objective, oracle.best, 1e-7) << trial;
    EXPECT_GE(r.best_bound, r.objective - 1e-9);
  }
}

TEST(OuterApproximation, SingleConeReachesItsBoundary) {
  // max w  s.t.  w^2 <= a * b,  a, b <= 1.
  ConicMipInstance inst;
  inst.add_column("w", -5.0, 5.0);
  inst.add_column("a", 0.0, 1.0);
  inst.add_column("b", 0.0, 1.0);
  inst.objective = {1.0, 0.0, 0.0};
  inst.add_cones({RotatedCone{"c", {{0, 1.0}}, {1, 1.0}, {2, 1.0}}});
  OuterApproximationSolver oa;
  const auto r = solve(inst, tight(), oa);
  ASSERT_EQ(r.status, SolveStatus::kOptimal);
  EXPECT_NEAR(r.objective, 1.0, 1e-7);
  EXPECT_NEAR(r.x[0], 1.0, 1e-7);
  EXPECT_GT(oa.pool_size(), 0);
  EXPECT_LE(check_point(inst, r.x).cone, 1e-8);
}

TEST(OuterApproximation, NodeResultIsAValidBound) {
  const Network net = parse_case(case_path("toy3.m"));
  const auto f = build_formulation(net, generate_risk_scenario(net, 2), 0.5, FormulationKind::kSocOpsP);
  OuterApproximationSolver oa;
  oa.prepare(f.instance);
  std::vector<double> lo, hi;
  for (const Column& c : f.instance.columns) {
    lo.push_back(c.lower);
    hi.push_back(c.upper);
  }
  NodeRequest req{lo, hi};
  const auto root = oa.solve(f.instance, req);
  ASSERT_EQ(root.status, NodeStatus::kOptimal);
  const auto r = solve(f.instance, tight());
  ASSERT_EQ(r.status, SolveStatus::kOptimal);
  EXPECT_GE(root.objective, r.objective - 1e-7);
}

TEST(ConicBranchAndBound, ToyMatchesEnumerationForEveryKind) {
  const Network net = parse_case(case_path("toy3.m"));
  for (std::uint64_t seed : {1u, 3u}) {
    const auto scenario = generate_risk_scenario(net, seed);
    for (auto kind : {FormulationKind::kSocOps, FormulationKind::kSocOpsP, FormulationKind::kSocOpsT,
                      FormulationKind::kSocOpsM, FormulationKind::kSocOpsS, FormulationKind::kDcOps}) {
      const auto f = build_formulation(net, scenario, 0.5, kind);
      const auto oracle = enumerate(f.instance);
      ASSERT_TRUE(oracle.any);
      const auto r = solve(f.instance, tight());
      ASSERT_EQ(r.status, SolveStatus::kOptimal) << to_string(kind);
      EXPECT_NEAR(r.objective, oracle.best, 1e-6) << to_string(kind) << " seed " << seed;
      const auto rep = check_point(f.instance, r.x);
      EXPECT_TRUE(rep.feasible(1e-6)) << to_string(kind) << " worst " << rep.max();
    }
  }
}

TEST(ConicBranchAndBound, BranchingAndSelectionRulesAgree) {
  const Network net = parse_case(case_path("pglib_opf_case5_pjm.m"));
  const auto f = build_formulation(net, generate_risk_scenario(net, 1), 0.5, FormulationKind::kSocOpsP);
  const double reference = solve(f.instance, tight()).objective;
  for (auto rule : {BranchingRule::kMostFractional, BranchingRule::kPseudoCost}) {
    for (auto sel : {NodeSelection::kBestBound, NodeSelection::kDepthFirst, NodeSelection::kHybrid}) {
      BnbConfig c = tight();
      c.branching = rule;
      c.node_selection = sel;
      const auto r = solve(f.instance, c);
      ASSERT_EQ(r.status, SolveStatus::kOptimal);
      EXPECT_NEAR(r.objective, reference, 1e-6);
    }
  }
}

TEST(ConicBranchAndBound, RunsAreDeterministic) {
  const Network net = parse_case(case_path("pglib_opf_case14_ieee.m"));
  const auto f = build_formulation(net, generate_risk_scenario(net, 3), 0.5, FormulationKind::kSocOpsT);
  BnbConfig c;
  c.gap = 1e-4;
  const auto a = solve(f.instance, c);
  const auto b = solve(f.instance, c);
  ASSERT_TRUE(a.has_solution());
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.nodes, b.nodes);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.best_bound, b.best_bound);
}

TEST(ConicBranchAndBound, NodeLimitReportsAValidGap) {
  const Network net = parse_case(case_path("pglib_opf_case14_ieee.m"));
  const auto f = build_formulation(net, generate_risk_scenario(net, 1), 0.5, FormulationKind::kSocOpsP);
  BnbConfig c = tight();
  c.node_limit = 3;
  std::ostringstream log;
  c.log = &log;
  const auto r = solve(f.instance, c);
  ASSERT_TRUE(r.status == SolveStatus::kFeasibleAtLimit || r.status == SolveStatus::kOptimal);
  EXPECT_LE(r.nodes, 3);
  if (r.has_solution()) {
    EXPECT_GE(r.best_bound, r.objective - 1e-9);
    EXPECT_NEAR(r.gap, relative_gap(r.objective, r.best_bound), 1e-12);
  }
  EXPECT_FALSE(log.str().empty());
}

TEST(FixAndResolve, MatchesTheIncumbentTopology) {
  const Network net = parse_case(case_path("toy3.m"));
  const auto f = build_formulation(net, generate_risk_scenario(net, 4), 0.5, FormulationKind::kSocOpsP);
  const auto r = solve(f.instance, tight());
  ASSERT_EQ(r.status, SolveStatus::kOptimal);
  std::vector<double> a;
  for (int c : f.instance.integer_columns()) a.push_back(std::round(r.x[c]));
  OuterApproximationSolver node;
  const auto fixed = fix_and_resolve(f.instance, a, node);
  ASSERT_EQ(fixed.status, SolveStatus::kOptimal);
  EXPECT_NEAR(fixed.objective, r.objective, 1e-7);
  EXPECT_EQ(fix_and_resolve(f.instance, std::vector<double>{1.0}, node).status, SolveStatus::kError);

  // Every switch off is always feasible and delivers nothing.
  const std::vector<double> off(a.size(), 0.0);
  const auto dark = fix_and_resolve(f.instance, off, node);
  ASSERT_EQ(dark.status, SolveStatus::kOptimal);
  EXPECT_NEAR(load_term(net, f.vmap, dark.x), 0.0, 1e-12);

  // A live line at a dead bus breaks the energization rows.
  std::vector<double> broken(a.size(), 0.0);
  const auto ints = f.instance.integer_columns();
  for (std::size_t k = 0; k < ints.size(); ++k) {
    if (ints[k] == f.vmap.z_line[0]) broken[k] = 1.0;
  }
  EXPECT_EQ(fix_and_resolve(f.instance, broken, node).status, SolveStatus::kInfeasible);
}
