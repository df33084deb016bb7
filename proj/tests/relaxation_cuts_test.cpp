#include "gridshed/relaxation_cuts.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <tuple>

#include "gridshed/errors.hpp"
#include "test_support.hpp"

using namespace gridshed;

namespace {

bool satisfied(const LinearRow& row, std::span<const double> x, double tol) {
  const double a = row.activity(x);
  switch (row.sense) {
    case RowSense::kLessEqual: return a <= row.rhs + tol;
    case RowSense::kGreaterEqual: return a >= row.rhs - tol;
    case RowSense::kEqual: return std::abs(a - row.rhs) <= tol;
  }
  return false;
}

bool all_satisfied(const std::vector<LinearRow>& rows, std::span<const double> x, double tol) {
  for (const LinearRow& r : rows) {
    if (!satisfied(r, x, tol)) return false;
  }
  return true;
}

}  // namespace

TEST(TangentCuts, ArithmeticExamples) {
  EXPECT_EQ(tangent_value(0.0, 0.7), 0.0);
  for (double l : {-1.3, -0.2, 0.4, 2.0}) EXPECT_DOUBLE_EQ(tangent_value(l, l), l * l);
  EXPECT_DOUBLE_EQ(tangent_value(1.0, 0.5), 0.0);
  EXPECT_LE(tangent_value(1.0, 0.5), 0.25);
  EXPECT_DOUBLE_EQ(tangent_value(0.5, 1.0, 0.0), 1.0) << "z scales only the constant";
}

TEST(TangentCuts, RowsEncodeTheTangent) {
  const std::vector<double> pts{-1.0, 0.0, 0.5};
  const auto rows = tangent_cuts(0, 1, 2, pts);
  ASSERT_EQ(rows.size(), 3u);
  // Row at l = 0 reduces to y >= 0.
  ASSERT_EQ(rows[1].terms.size(), 1u);
  EXPECT_EQ(rows[1].terms[0], (Term{0, 1.0}));
  EXPECT_EQ(rows[1].sense, RowSense::kGreaterEqual);
  // y >= 2 l x - l^2 z at l = 0.5: y - x + 0.25 z >= 0.
  EXPECT_EQ(rows[2].terms, (std::vector<Term>{{0, 1.0}, {1, -1.0}, {2, 0.25}}));
  EXPECT_THROW(tangent_cuts(0, 1, 2, std::vector<double>{}), BuildError);
}

TEST(TangentCuts, UnderestimateSquaresOnRandomSamples) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  double worst = -kInf;
  for (int k = 0; k < 100000; ++k) {
    const double x = u(rng), l = u(rng);
    worst = std::max(worst, tangent_value(l, x) - x * x);
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(McCormick, ArithmeticExamples) {
  // Interior point of the box [0.81, 1.21]^2.
  EXPECT_NEAR(mccormick_upper_1(1.0, 1.0, 0.81, 1.21), 1.0399, 1e-12);
  EXPECT_NEAR(mccormick_upper_2(1.0, 1.0, 0.81, 1.21), 1.0399, 1e-12);
  // Exact at the corner.
  EXPECT_NEAR(mccormick_upper_1(1.21, 1.21, 0.81, 1.21), 1.21 * 1.21, 1e-12);
  EXPECT_NEAR(mccormick_upper_2(1.21, 1.21, 0.81, 1.21), 1.21 * 1.21, 1e-12);
  EXPECT_EQ(mccormick_upper_1(0.0, 0.0, 0.81, 1.21, 0.0), 0.0);
}

TEST(McCormick, OverestimatesProductsOnRandomBoxes) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 2.0), t(0.0, 1.0);
  double worst = -kInf;
  for (int k = 0; k < 100000; ++k) {
    double a_lo = u(rng), a_hi = u(rng), b_lo = u(rng), b_hi = u(rng);
    if (a_lo > a_hi) std::swap(a_lo, a_hi);
    if (b_lo > b_hi) std::swap(b_lo, b_hi);
    const double a = a_lo + (a_hi - a_lo) * t(rng);
    const double b = b_lo + (b_hi - b_lo) * t(rng);
    worst = std::max(worst, a * b - mccormick_upper_1(a, b, a_lo, b_hi));
    worst = std::max(worst, a * b - mccormick_upper_2(a, b, b_lo, a_hi));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(Secant, ArithmeticExamples) {
  const double lo = 0.81, hi = 1.21;
  EXPECT_NEAR(secant_value(1.01, lo, hi), 1.0601, 1e-12);
  EXPECT_GE(secant_value(1.01, lo, hi), 1.01 * 1.01);
  EXPECT_NEAR(secant_value(lo, lo, hi), lo * lo, 1e-12);
  EXPECT_NEAR(secant_value(hi, lo, hi), hi * hi, 1e-12);
}

TEST(Secant, OverestimatesSquaresOnTheInterval) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 2.0), t(0.0, 1.0);
  double worst = -kInf;
  for (int k = 0; k < 100000; ++k) {
    double lo = u(rng), hi = u(rng);
    if (lo > hi) std::swap(lo, hi);
    const double s = lo + (hi - lo) * t(rng);
    const double gap = secant_value(s, lo, hi) - s * s;
    worst = std::max(worst, -gap);
    // Strict inside the interval, zero at the ends: gap = (s - lo)(hi - s).
    EXPECT_NEAR(gap, (s - lo) * (hi - s), 1e-12);
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(Linearization, GridsAccumulate) {
  const auto five = Linearization::uniform(5).points(-1.0, 1.0);
  EXPECT_EQ(five, (std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0}));
  const auto union_grid = Linearization{{5, 10}}.points(-1.0, 1.0);
  for (double p : five) {
    EXPECT_TRUE(std::find(union_grid.begin(), union_grid.end(), p) != union_grid.end());
  }
  EXPECT_TRUE(std::is_sorted(union_grid.begin(), union_grid.end()));
  EXPECT_EQ(union_grid.size(), 5u + 10u - 2u);  // the two grids share only the endpoints
  EXPECT_EQ(uniform_points(0.0, 1.0, 2), (std::vector<double>{0.0, 1.0}));
  EXPECT_THROW(uniform_points(0.0, 1.0, 1), BuildError);
}

namespace {

// A cone ((W^R, W^I); W^Fr, W^To) over columns 0..3.
RotatedCone voltage_cone() {
  return RotatedCone{"v", {{0, 1.0}, {1, 1.0}}, {2, 1.0}, {3, 1.0}};
}

}  // namespace

TEST(LazyConeCut, SeparatesAndStaysValid) {
  const RotatedCone cone = voltage_cone();
  const std::vector<double> bad{1.0, 0.0, 0.5, 0.5};
  const auto cut = lazy_cone_cut(bad, cone, 1e-9);
  ASSERT_TRUE(cut.has_value());
  EXPECT_GT(cut->activity(bad), cut->rhs);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 2.0), ang(0.0, 2.0 * std::numbers::pi), rad(0.0, 1.0);
  for (int k = 0; k < 10000; ++k) {
    const double a = u(rng), b = u(rng);
    const double r = std::sqrt(a * b) * rad(rng), th = ang(rng);
    const std::vector<double> p{r * std::cos(th), r * std::sin(th), a, b};
    ASSERT_TRUE(satisfied(*cut, p, 1e-12)) << "sample " << k;
  }
}

TEST(LazyConeCut, NoCutForFeasiblePoints) {
  const RotatedCone cone = voltage_cone();
  EXPECT_FALSE(lazy_cone_cut(std::vector<double>{0.0, 0.0, 0.0, 0.0}, cone).has_value());
  EXPECT_FALSE(lazy_cone_cut(std::vector<double>{0.3, 0.4, 1.0, 1.0}, cone).has_value());
}

TEST(LazyConeCut, ZeroRadiusGivesAnEqualityRow) {
  const RotatedCone cone = voltage_cone();
  std::vector<Column> cols(4);
  cols[3].lower = cols[3].upper = 0.0;
  const auto cut = lazy_cone_cut(std::vector<double>{0.2, -0.7, 1.0, 0.0}, cone, 1e-9, cols);
  ASSERT_TRUE(cut.has_value());
  EXPECT_EQ(cut->sense, RowSense::kEqual);
  EXPECT_EQ(cut->terms, (std::vector<Term>{{1, 1.0}}));
}

TEST(LazyConeCut, SupportingRowsAreValidEverywhere) {
  const RotatedCone cone = voltage_cone();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2.0, 2.0), pos(0.0, 2.0), rad(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::vector<double> at{u(rng), u(rng), pos(rng), pos(rng)};
    const auto row = cone_supporting_row(cone, at);
    if (!row) continue;
    for (int k = 0; k < 200; ++k) {
      const double a = pos(rng), b = pos(rng), r = std::sqrt(a * b) * rad(rng), th = u(rng) * std::numbers::pi;
      const std::vector<double> p{r * std::cos(th), r * std::sin(th), a, b};
      ASSERT_LE(row->activity(p), 1e-12);
    }
  }
}

// ---------------------------------------------------------------------------
// Containment of the linear voltage surrogates.

namespace {

struct LinePoint {
  double wr, wi, fr, to;
};

// Evaluates the voltage surrogate rows of line 0 of `f` at the given
// voltage point, with every y set to its exact square.
std::vector<double> exact_y_point(const Formulation& f, const LinePoint& p) {
  const auto& vm = f.vmap;
  std::vector<double> x(f.instance.num_columns(), 0.0);
  x[vm.z_line[0]] = 1.0;
  x[vm.w_re[0]] = p.wr;
  x[vm.w_im[0]] = p.wi;
  x[vm.w_fr[0]] = p.fr;
  x[vm.w_to[0]] = p.to;
  x[vm.y_re[0]] = p.wr * p.wr;
  x[vm.y_im[0]] = p.wi * p.wi;
  if (!vm.y_sum.empty()) x[vm.y_sum[0]] = 0.25 * (p.to - p.fr) * (p.to - p.fr);
  return x;
}

std::vector<LinearRow> only_line0(const std::vector<LinearRow>& rows, const VariableMap& vm) {
  std::vector<LinearRow> out;
  for (const LinearRow& r : rows) {
    for (const Term& t : r.terms) {
      if (t.col == vm.z_line[0]) {
        out.push_back(r);
        break;
      }
    }
  }
  return out;
}

}  // namespace

TEST(VoltageSurrogates, ConePointsSatisfyTheSecantRows) {
  const Network net = gridshed::testing::two_bus_network();
  const RiskScenario scenario{1, {1.0}};
  const Formulation s = build_formulation(net, scenario, 0.5, FormulationKind::kSocOpsS, 7);
  const auto rows = only_line0(secant_voltage(net, s.vmap, Linearization::uniform(7)), s.vmap);
  const auto tangents =
      only_line0(voltage_quadratic_cuts(net, s.vmap, Linearization::uniform(7)), s.vmap);
  const auto b = derive_bounds(net)[0];
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> t(0.0, 1.0);
  int checked = 0;
  for (int k = 0; k < 20000; ++k) {
    const double fr = b.wfr_lo + (b.wfr_hi - b.wfr_lo) * t(rng);
    const double to = b.wto_lo + (b.wto_hi - b.wto_lo) * t(rng);
    const double r = std::sqrt(fr * to) * t(rng), th = (t(rng) - 0.5) * std::numbers::pi;
    const LinePoint p{r * std::cos(th), r * std::sin(th), fr, to};
    const auto x = exact_y_point(s, p);
    ASSERT_TRUE(all_satisfied(rows, x, 1e-12)) << "sample " << k;
    ASSERT_TRUE(all_satisfied(tangents, x, 1e-12)) << "sample " << k;
    ++checked;
  }
  EXPECT_EQ(checked, 20000);
}

TEST(VoltageSurrogates, ConePointsSatisfyTheMcCormickRows) {
  const Network net = gridshed::testing::two_bus_network();
  const RiskScenario scenario{1, {1.0}};
  const Formulation m = build_formulation(net, scenario, 0.5, FormulationKind::kSocOpsM, 7);
  const auto rows = only_line0(mccormick_voltage(net, m.vmap), m.vmap);
  const auto b = derive_bounds(net)[0];
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> t(0.0, 1.0);
  for (int k = 0; k < 20000; ++k) {
    const double fr = b.wfr_lo + (b.wfr_hi - b.wfr_lo) * t(rng);
    const double to = b.wto_lo + (b.wto_hi - b.wto_lo) * t(rng);
    const double r = std::sqrt(fr * to) * t(rng), th = (t(rng) - 0.5) * std::numbers::pi;
    const auto x = exact_y_point(m, {r * std::cos(th), r * std::sin(th), fr, to});
    ASSERT_TRUE(all_satisfied(rows, x, 1e-12)) << "sample " << k;
  }
}

// The secant row is not uniformly tighter than the McCormick pair. At a box
// corner McCormick is exact while the secant keeps slack (s - l)(u - s), so
// a point can satisfy every secant-model row and still break McCormick.
TEST(VoltageSurrogates, SecantRowsDoNotImplyMcCormickAtBoxCorners) {
  const Network net = gridshed::testing::two_bus_network();
  const RiskScenario scenario{1, {1.0}};
  const Formulation s = build_formulation(net, scenario, 0.5, FormulationKind::kSocOpsS, 5);
  const Formulation m = build_formulation(net, scenario, 0.5, FormulationKind::kSocOpsM, 5);
  const auto b = derive_bounds(net)[0];
  // W^Fr at its lower bound, W^To at its upper bound: W^Fr W^To = 0.81 * 1.21.
  const double fr = b.wfr_lo, to = b.wto_hi;
  const double product = fr * to;
  const double secant_room = secant_value(0.5 * (fr + to), b.secant_lo, b.secant_hi) -
                             0.25 * (to - fr) * (to - fr);
  ASSERT_GT(secant_room, product + 1e-3);
  const double wr = std::sqrt(0.5 * (product + secant_room));  // between the two limits
  const LinePoint p{wr, 0.0, fr, to};

  const auto s_rows = only_line0(secant_voltage(net, s.vmap, Linearization::uniform(5)), s.vmap);
  EXPECT_TRUE(all_satisfied(s_rows, exact_y_point(s, p), 1e-12));
  const auto m_rows = only_line0(mccormick_voltage(net, m.vmap), m.vmap);
  EXPECT_FALSE(all_satisfied(m_rows, exact_y_point(m, p), 1e-12));
}

TEST(ThermalLinearization, TangencyAtTheLimit) {
  const Network net = gridshed::testing::two_bus_network();
  const RiskScenario scenario{1, {1.0}};
  const Formulation t = build_formulation(net, scenario, 0.5, FormulationKind::kSocOpsT, 5);
  const auto rows = thermal_linearization(net, t.vmap, Linearization::uniform(5));
  const auto& vm = t.vmap;
  const double cap = net.lines()[0].rate;
  std::vector<double> x(t.instance.num_columns(), 0.0);
  x[vm.z_line[0]] = 1.0;
  x[vm.p_fr[0]] = cap;
  x[vm.yp_fr[0]] = cap * cap;
  EXPECT_TRUE(all_satisfied(rows, x, 1e-12));
  // The tangent at l = T forces y^P >= T^2, so any smaller y fails.
  x[vm.yp_fr[0]] = cap * cap - 1e-6;
  EXPECT_FALSE(all_satisfied(rows, x, 1e-9));
  // Over the limit the budget row fails even with exact squares.
  x[vm.p_fr[0]] = 0.8 * cap;
  x[vm.q_fr[0]] = 0.8 * cap;
  x[vm.yp_fr[0]] = x[vm.yq_fr[0]] = 0.64 * cap * cap;
  EXPECT_FALSE(all_satisfied(rows, x, 1e-9));
}

TEST(ThermalLinearization, DiscPointsAreFeasible) {
  const Network net = gridshed::testing::two_bus_network();
  const RiskScenario scenario{1, {1.0}};
  const Formulation t = build_formulation(net, scenario, 0.5, FormulationKind::kSocOpsT, 5);
  const auto rows = thermal_linearization(net, t.vmap, Linearization::uniform(5));
  const auto& vm = t.vmap;
  const double cap = net.lines()[0].rate;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 5000; ++k) {
    const double r = cap * std::sqrt(u(rng)), th = 2.0 * std::numbers::pi * u(rng);
    std::vector<double> x(t.instance.num_columns(), 0.0);
    x[vm.z_line[0]] = 1.0;
    for (auto [p, q, yp, yq] : {std::tuple{vm.p_fr[0], vm.q_fr[0], vm.yp_fr[0], vm.yq_fr[0]},
                                std::tuple{vm.p_to[0], vm.q_to[0], vm.yp_to[0], vm.yq_to[0]}}) {
      x[p] = r * std::cos(th);
      x[q] = r * std::sin(th);
      x[yp] = x[p] * x[p];
      x[yq] = x[q] * x[q];
    }
    ASSERT_TRUE(all_satisfied(rows, x, 1e-12));
  }
}
