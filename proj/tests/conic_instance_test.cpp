#include "gridshed/conic_instance.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gridshed/errors.hpp"
#include "gridshed/formulation.hpp"
#include "test_support.hpp"

using namespace gridshed;
using gridshed::testing::case_path;

namespace {

ConicMipInstance small_instance() {
  ConicMipInstance inst;
  inst.name = "small";
  inst.add_column("x", 0.0, 4.0);
  inst.add_column("y", -1.0, 1.0);
  inst.add_column("t", 0.0, kInf);
  inst.add_column("z", 0.0, 1.0, true);
  inst.objective = {1.0, 0.5, 0.0, -2.0};
  inst.add_rows({LinearRow{"r0", {{0, 1.0}, {3, -4.0}}, RowSense::kLessEqual, 0.0}});
  inst.add_cones({RotatedCone{"c0", {{0, 1.0}, {1, 1.0}}, {2, 1.0}, {2, 1.0}}});
  return inst;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("gridshed_" + name);
}

}  // namespace

TEST(InstanceValidate, WellFormedIsEmpty) { EXPECT_TRUE(validate(small_instance()).empty()); }

TEST(InstanceValidate, DanglingColumnIsOneError) {
  auto inst = small_instance();
  inst.rows.push_back(LinearRow{"bad", {{inst.num_columns(), 1.0}}, RowSense::kEqual, 0.0});
  EXPECT_EQ(validate(inst).size(), 1u);
}

TEST(InstanceValidate, InvertedBoundsIsOneError) {
  auto inst = small_instance();
  inst.columns[1].lower = 1.0;
  inst.columns[1].upper = 0.0;
  EXPECT_EQ(validate(inst).size(), 1u);
}

TEST(InstanceValidate, RepeatedConeColumnIsAnError) {
  auto inst = small_instance();
  inst.cones[0].lhs.push_back({0, 2.0});
  EXPECT_FALSE(validate(inst).empty());
  auto short_obj = small_instance();
  short_obj.objective.pop_back();
  EXPECT_FALSE(validate(short_obj).empty());
}

TEST(InstanceSerialize, RoundTripsBuiltFormulations) {
  const Network net = parse_case(case_path("pglib_opf_case14_ieee.m"));
  const auto scenario = generate_risk_scenario(net, 1);
  for (auto kind : {FormulationKind::kSocOps, FormulationKind::kSocOpsP, FormulationKind::kSocOpsT,
                    FormulationKind::kSocOpsM, FormulationKind::kSocOpsS}) {
    const auto f = build_formulation(net, scenario, 0.5, kind, 5);
    ASSERT_TRUE(validate(f.instance).empty());
    const auto path = temp_file("roundtrip.json");
    serialize(f.instance, path);
    const auto back = deserialize(path);
    EXPECT_EQ(back, f.instance) << to_string(kind);
    std::filesystem::remove(path);
  }
  const auto dc = build_dc_ops(net, scenario, 0.5);
  EXPECT_EQ(instance_from_json(nlohmann::json::parse(to_json(dc.instance).dump())), dc.instance);
}

TEST(InstanceSerialize, NumbersSurviveBitExactly) {
  ConicMipInstance inst = small_instance();
  inst.objective[1] = 0.1 + 0.2;
  inst.rows[0].rhs = std::nextafter(1.0, 2.0);
  inst.columns[0].upper = 1e-300;
  const auto back = instance_from_json(nlohmann::json::parse(to_json(inst).dump()));
  EXPECT_EQ(back.objective[1], inst.objective[1]);
  EXPECT_EQ(back.rows[0].rhs, inst.rows[0].rhs);
  EXPECT_EQ(back.columns[0].upper, 1e-300);
  EXPECT_EQ(back.columns[2].upper, kInf);
}

TEST(InstanceSerialize, CorruptFilesAreRejected) {
  const auto path = temp_file("truncated.json");
  const std::string text = to_json(small_instance()).dump();
  {
    std::ofstream out(path);
    out << text.substr(0, text.size() / 2);
  }
  EXPECT_THROW(deserialize(path), ParseError);
  auto j = to_json(small_instance());
  j["version"] = kInstanceFormatVersion + 1;
  EXPECT_THROW(instance_from_json(j), ParseError);
  std::filesystem::remove(path);
}

TEST(InstanceSerialize, Case14PerspectiveConeCensus) {
  const Network net = parse_case(case_path("pglib_opf_case14_ieee.m"));
  const auto f = build_formulation(net, generate_risk_scenario(net, 1), 0.5,
                                   FormulationKind::kSocOpsP, 5);
  const auto back = instance_from_json(to_json(f.instance));
  EXPECT_EQ(back.cones.size(), 3u * 20u);
}

TEST(CheckPoint, ShutdownPointIsFeasible) {
  const Network net = parse_case(case_path("pglib_opf_case14_ieee.m"));
  const auto scenario = generate_risk_scenario(net, 2);
  for (auto kind : {FormulationKind::kSocOps, FormulationKind::kSocOpsP, FormulationKind::kSocOpsT,
                    FormulationKind::kSocOpsM, FormulationKind::kSocOpsS}) {
    const auto f = build_formulation(net, scenario, 0.5, kind, 5);
    const std::vector<double> zeros(f.instance.num_columns(), 0.0);
    EXPECT_TRUE(check_point(f.instance, zeros).feasible(1e-12)) << to_string(kind);
  }
}

TEST(CheckPoint, ReportsConeViolationMagnitude) {
  const auto inst = small_instance();
  // ||(x, y)|| = sqrt(0.7^2 + 0.24^2) = 0.74; t = 0.64 gives violation 0.1.
  const std::vector<double> x{0.7, 0.24, 0.64, 1.0};
  const auto rep = check_point(inst, x);
  EXPECT_NEAR(rep.cone, 0.1, 1e-12);
  EXPECT_EQ(rep.worst_cone, 0);
  EXPECT_EQ(rep.linear, 0.0);
  EXPECT_EQ(rep.integrality, 0.0);
  EXPECT_NEAR(rep.max(), 0.1, 1e-12);
}

TEST(CheckPoint, ReportsLinearBoundAndIntegralityViolations) {
  const auto inst = small_instance();
  const std::vector<double> x{3.0, 0.0, 3.0, 0.5};
  const auto rep = check_point(inst, x);
  EXPECT_NEAR(rep.linear, 1.0, 1e-12);  // 3 - 4 * 0.5
  EXPECT_EQ(rep.worst_row, 0);
  EXPECT_NEAR(rep.integrality, 0.5, 1e-12);
  const std::vector<double> out_of_box{5.0, 0.0, 5.0, 1.0};
  EXPECT_NEAR(check_point(inst, out_of_box).bounds, 1.0, 1e-12);
}

TEST(LpExport, LinearKindsOnly) {
  const Network net = parse_case(case_path("toy3.m"));
  const auto scenario = generate_risk_scenario(net, 1);
  const auto m = build_formulation(net, scenario, 0.5, FormulationKind::kSocOpsM, 5);
  const std::string text = to_lp_format(m.instance);
  EXPECT_NE(text.find("Maximize"), std::string::npos);
  EXPECT_NE(text.find("Subject To"), std::string::npos);
  EXPECT_NE(text.find("General"), std::string::npos);
  EXPECT_NE(text.find("End"), std::string::npos);
  const auto p = build_formulation(net, scenario, 0.5, FormulationKind::kSocOpsP, 5);
  EXPECT_THROW(to_lp_format(p.instance), BuildError);
}
