#include "gridshed/experiment.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gridshed/errors.hpp"
#include "test_support.hpp"

using namespace gridshed;
using gridshed::testing::case_path;
using gridshed::testing::read_file;

namespace {

const std::vector<FormulationKind> kAllKinds{
    FormulationKind::kSocOps,  FormulationKind::kSocOpsP, FormulationKind::kSocOpsT,
    FormulationKind::kSocOpsM, FormulationKind::kSocOpsS, FormulationKind::kDcOps};

ExperimentPlan toy_plan() {
  ExperimentPlan plan;
  plan.cases = {case_path("toy3.m")};
  plan.kinds = kAllKinds;
  plan.gap = 1e-8;
  return plan;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gridshed_exp_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

// Drops the time_s column, the only field allowed to differ between reruns.
std::string without_time(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  int time_col = -1;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (time_col < 0) {
      for (std::size_t k = 0; k < fields.size(); ++k) {
        if (fields[k] == "time_s") time_col = static_cast<int>(k);
      }
    }
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (static_cast<int>(k) != time_col) out += fields[k] + ",";
    }
    out += "\n";
  }
  return out;
}

ResultRecord record(const std::string& name, FormulationKind kind, SolveStatus status, double time_s) {
  ResultRecord r;
  r.case_name = name;
  r.kind = kind;
  r.status = status;
  r.time_s = time_s;
  r.perf_ratio = std::nan("");
  r.bound_ratio = std::nan("");
  return r;
}

}  // namespace

TEST(Plan, ValidationNeedsCasesSeedsAndKinds) {
  ExperimentPlan plan = toy_plan();
  EXPECT_TRUE(validate(plan).empty());
  auto broken = plan;
  broken.cases.clear();
  EXPECT_FALSE(validate(broken).empty());
  broken = plan;
  broken.seeds.clear();
  EXPECT_FALSE(validate(broken).empty());
  broken = plan;
  broken.kinds.clear();
  EXPECT_FALSE(validate(broken).empty());
  broken = plan;
  broken.time_limit_s = 0.0;
  EXPECT_FALSE(validate(broken).empty());
  EXPECT_THROW(run_matrix(broken), InputError);
}

TEST(Plan, CaseNamesResolveToBundledFiles) {
  EXPECT_EQ(resolve_case("case14").filename(), "pglib_opf_case14_ieee.m");
  EXPECT_EQ(resolve_case("case5").filename(), "pglib_opf_case5_pjm.m");
  EXPECT_EQ(resolve_case("toy3").filename(), "toy3.m");
  EXPECT_EQ(resolve_case(case_path("toy3.m").string()), case_path("toy3.m"));
  EXPECT_THROW(resolve_case("case9999"), InputError);
}

TEST(Plan, ThreadOverrideFromEnvironment) {
  ::unsetenv("GRIDSHED_THREADS");
  EXPECT_EQ(effective_threads(3), 3);
  ::setenv("GRIDSHED_THREADS", "2", 1);
  EXPECT_EQ(effective_threads(3), 2);
  ::setenv("GRIDSHED_THREADS", "zero", 1);
  EXPECT_EQ(effective_threads(3), 3);
  ::unsetenv("GRIDSHED_THREADS");
}

TEST(Matrix, OneRecordPerCellInPlanOrder) {
  const ExperimentPlan plan = toy_plan();
  const auto records = run_matrix(plan);
  ASSERT_EQ(records.size(), 30u);
  std::size_t k = 0;
  for (std::uint64_t seed : plan.seeds) {
    for (FormulationKind kind : plan.kinds) {
      const ResultRecord& r = records[k++];
      EXPECT_EQ(r.case_name, "toy3");
      EXPECT_EQ(r.seed, seed);
      EXPECT_EQ(r.kind, kind);
      EXPECT_EQ(r.alpha, 0.5);
      EXPECT_EQ(r.lin_points, 5);
      EXPECT_EQ(r.gap_target, 1e-8);
      EXPECT_EQ(r.feasibility_tol, 1e-6);
      EXPECT_EQ(r.integrality_tol, 1e-6);
      ASSERT_EQ(r.status, SolveStatus::kOptimal) << r.message;
      if (kind == FormulationKind::kSocOps || kind == FormulationKind::kSocOpsP) {
        EXPECT_LE(r.bound_ratio, 1.0 + 1e-6);
        if (r.redispatch_feasible && !std::isnan(r.perf_ratio)) EXPECT_NEAR(r.perf_ratio, 1.0, 1e-4);
      } else if (kind != FormulationKind::kDcOps) {
        EXPECT_GE(r.bound_ratio, 1.0 - 1e-4) << to_string(kind);
      }
    }
  }
  // DC solutions go through the same SOC redispatch.
  for (const ResultRecord& r : records) {
    if (r.kind != FormulationKind::kDcOps) continue;
    EXPECT_TRUE(r.redispatch_feasible || !r.message.empty());
    EXPECT_FALSE(std::isnan(r.bound_ratio));
  }
}

TEST(Matrix, RerunsWriteIdenticalFilesApartFromTiming) {
  ExperimentPlan plan = toy_plan();
  plan.seeds = {1, 2};
  plan.out_dir = scratch("a");
  run_matrix(plan);
  const auto first = plan.out_dir;
  plan.out_dir = scratch("b");
  plan.threads = 2;
  run_matrix(plan);
  const std::string a = read_file(first / "results.csv"), b = read_file(plan.out_dir / "results.csv");
  ASSERT_FALSE(a.empty());
  EXPECT_EQ(without_time(a), without_time(b));
  auto ja = nlohmann::json::parse(read_file(first / "results.json"));
  auto jb = nlohmann::json::parse(read_file(plan.out_dir / "results.json"));
  for (auto* j : {&ja, &jb}) {
    for (auto& rec : *j) rec.erase("time_s");
  }
  EXPECT_EQ(ja, jb);
  EXPECT_TRUE(std::filesystem::exists(first / "results.txt"));
  std::filesystem::remove_all(first);
  std::filesystem::remove_all(plan.out_dir);
}

TEST(Matrix, ReferenceBoundFillsRatiosWithoutExactKinds) {
  ExperimentPlan plan = toy_plan();
  plan.seeds = {3};
  plan.kinds = {FormulationKind::kSocOpsM};
  const auto records = run_matrix(plan);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_GE(records[0].bound_ratio, 1.0 - 1e-6);
  plan.reference_bound = false;
  EXPECT_TRUE(std::isnan(run_matrix(plan)[0].bound_ratio));
}

TEST(Sweep, CensusAndBoundRatioMonotone) {
  ExperimentPlan plan = toy_plan();
  plan.cases = {case_path("pglib_opf_case5_pjm.m")};
  plan.seeds = {1, 2};
  for (auto kind : {FormulationKind::kSocOpsM, FormulationKind::kSocOpsS}) {
    const auto records = sweep_linearization(plan, kind, {5, 10, 15});
    ASSERT_EQ(records.size(), 6u);
    std::map<std::uint64_t, double> last;
    for (const ResultRecord& r : records) {
      EXPECT_EQ(r.kind, kind);
      ASSERT_EQ(r.status, SolveStatus::kOptimal);
      if (last.count(r.seed)) EXPECT_LE(r.bound_ratio, last[r.seed] + 1e-7);
      last[r.seed] = r.bound_ratio;
    }
    EXPECT_EQ(records[0].lin_points, 5);
    EXPECT_EQ(records[2].lin_points, 15);
  }
  EXPECT_THROW(sweep_linearization(plan, FormulationKind::kSocOpsT, {5}), InputError);
}

TEST(Reports, EmptyRecordsGiveHeaderOnlyFiles) {
  EXPECT_EQ(to_csv({}), std::string(kCsvHeader) + "\n");
  EXPECT_EQ(to_json(std::vector<ResultRecord>{}).dump(), "[]");
  const auto dir = scratch("empty");
  write_reports({}, dir, "results");
  EXPECT_EQ(read_file(dir / "results.csv"), std::string(kCsvHeader) + "\n");
  std::filesystem::remove_all(dir);
}

TEST(Reports, TimeLimitCountsAreParenthesized) {
  std::vector<ResultRecord> rs;
  for (int k = 0; k < 5; ++k) {
    rs.push_back(record("case14", FormulationKind::kSocOpsP,
                        k < 2 ? SolveStatus::kFeasibleAtLimit : SolveStatus::kOptimal, 10.0 + k));
  }
  const auto rows = aggregate(rs);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].runs, 5);
  EXPECT_EQ(rows[0].at_limit, 2);
  EXPECT_DOUBLE_EQ(rows[0].mean_time_s, 12.0);
  EXPECT_EQ(format_time_cell(12.0, 2), "12.00 (2)");
  EXPECT_EQ(format_time_cell(12.344, 0), "12.34");
  EXPECT_NE(render_tables(rows).find("12.00 (2)"), std::string::npos);
}

TEST(Reports, PercentFormatting) {
  EXPECT_EQ(format_percent(0.49386), "49.39%");
  EXPECT_EQ(format_percent(1.0), "100.00%");
  EXPECT_EQ(format_percent(std::nan("")), "-");
}

TEST(Reports, UndefinedRatiosAreEmptyOrNull) {
  const auto r = record("toy3", FormulationKind::kSocOpsM, SolveStatus::kOptimal, 1.0);
  const std::string csv = to_csv({r});
  const std::string row = csv.substr(csv.find('\n') + 1);
  EXPECT_EQ(row.substr(row.size() - 3), ",,\n");
  const auto j = to_json(r);
  EXPECT_TRUE(j["perf_ratio"].is_null());
  EXPECT_TRUE(j["bound_ratio"].is_null());
  EXPECT_EQ(j["kind"], "SOC-OPS-M");
}

TEST(Reports, WriteFailureThrows) {
  const auto blocker = std::filesystem::temp_directory_path() / "gridshed_exp_blocker";
  std::filesystem::remove_all(blocker);
  { std::ofstream(blocker) << "x"; }
  EXPECT_THROW(write_reports({}, blocker / "sub", "results"), std::runtime_error);
  std::filesystem::remove(blocker);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<int> hits(50, 0);
  parallel_for(50, 4, [&](int i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
}
