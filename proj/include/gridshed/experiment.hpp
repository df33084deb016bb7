#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridshed/formulation.hpp"
#include "gridshed/mip_solver.hpp"
#include "gridshed/network.hpp"
#include "gridshed/redispatch.hpp"

namespace gridshed {

struct ExperimentPlan {
  std::vector<std::filesystem::path> cases;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<FormulationKind> kinds;
  double alpha = 0.5;
  int lin_points = 5;
  double time_limit_s = 300.0;
  double gap = 1e-4;
  double feasibility_tol = 1e-6;
  double integrality_tol = 1e-6;
  int threads = 1;
  bool redispatch = true;
  // When no exact kind is in the plan, solve SOC-OPS-P per (case, seed) for
  // the bound-ratio denominator. Those solves are not reported as records.
  bool reference_bound = true;
  std::filesystem::path out_dir;  // empty: nothing written
  std::ostream* log = nullptr;
};

/// Empty when valid; otherwise the first problem found.
std::string validate(const ExperimentPlan& plan);

/// Resolves "case14", "pglib_opf_case14_ieee", "toy3" and the like against
/// the bundled case directory; any existing path is returned unchanged.
/// Throws InputError when nothing matches.
std::filesystem::path resolve_case(const std::string& name_or_path);

/// Bundled case directory (GRIDSHED_DATA_DIR/cases unless overridden by the
/// GRIDSHED_CASES environment variable).
std::filesystem::path bundled_case_dir();

/// Parses and sanitizes a case file.
Network load_case(const std::filesystem::path& path, int* sanitized = nullptr);

/// One (case, seed, kind, lin-points) solve with its redispatch evaluation.
struct ResultRecord {
  std::string case_name;
  std::uint64_t seed = 0;
  FormulationKind kind = FormulationKind::kSocOps;
  double alpha = 0.5;
  int lin_points = 5;
  SolveStatus status = SolveStatus::kError;
  double objective = 0.0;
  double bound = 0.0;
  double gap = 0.0;
  double time_s = 0.0;
  long nodes = 0;
  long cuts = 0;
  bool redispatch_feasible = false;
  double delivered = 0.0;
  double estimated = 0.0;
  double perf_ratio = 0.0;   // NaN when undefined
  double bound_ratio = 0.0;  // NaN when undefined
  double gap_target = 1e-4;
  double feasibility_tol = 1e-6;
  double integrality_tol = 1e-6;
  std::string message;

  bool has_solution() const {
    return status == SolveStatus::kOptimal || status == SolveStatus::kFeasibleAtLimit;
  }
};

/// Solution detail kept alongside a record for callers that inspect points.
struct CellOutcome {
  ResultRecord record;
  SolveResult solve;
  Formulation formulation;
  RedispatchReport redispatch;
};

struct CellSpec {
  std::filesystem::path case_path;
  std::uint64_t seed = 1;
  FormulationKind kind = FormulationKind::kSocOps;
  Linearization lin;
  int lin_label = 5;  // reported lin_points
};

/// Solves one cell; failures are recorded in the outcome, not thrown.
/// bound_ratio is left NaN (it needs the other cells).
CellOutcome run_cell(const ExperimentPlan& plan, const CellSpec& cell, const Network& net);

/// Every (case, seed, kind) of the plan, in case-major, seed, kind order
/// regardless of the thread count. Writes the "results" reports (see
/// write_reports) into out_dir when it is set.
std::vector<ResultRecord> run_matrix(const ExperimentPlan& plan);

/// Same, keeping solutions. Used by tests and the acceptance suite.
std::vector<CellOutcome> run_matrix_outcomes(const ExperimentPlan& plan);

/// Per case and seed, one record per count for `kind` (SOC-OPS-M or -S).
/// The grid at each count is the union of the uniform grids of every count
/// up to it, so the feasible region can only shrink as the count grows.
/// Writes the "sweep" reports into out_dir when set.
std::vector<ResultRecord> sweep_linearization(const ExperimentPlan& plan, FormulationKind kind,
                                              const std::vector<int>& counts);

/// Fills bound_ratio from the exact records of the same case and seed, or
/// from `reference` bounds keyed by (case, seed) when none is present.
void assign_bound_ratios(std::vector<ResultRecord>& records,
                         const std::vector<ResultRecord>& reference = {});

// ---------------------------------------------------------------------------
// Reports.

inline const char* kCsvHeader =
    "case,seed,kind,alpha,lin_points,status,objective,bound,gap,time_s,nodes,cuts,"
    "redispatch_feasible,delivered,estimated,perf_ratio,bound_ratio";

std::string to_csv(const std::vector<ResultRecord>& records);
nlohmann::json to_json(const ResultRecord& record);
nlohmann::json to_json(const std::vector<ResultRecord>& records);

/// Aggregate over seeds for one (case, kind, lin_points).
struct AggregateRow {
  std::string case_name;
  FormulationKind kind = FormulationKind::kSocOps;
  int lin_points = 5;
  int runs = 0;
  double mean_time_s = 0.0;
  int at_limit = 0;            // runs that stopped at the time limit
  double mean_bound_ratio = 0.0;  // over runs with a ratio; NaN if none
  double mean_perf_ratio = 0.0;   // over feasible redispatches; NaN if none
  int feasible = 0;               // feasible redispatches
};

std::vector<AggregateRow> aggregate(const std::vector<ResultRecord>& records);

/// "12.34 (2)" when runs hit the limit, "12.34" otherwise.
std::string format_time_cell(double seconds, int at_limit);
/// Two decimals and a percent sign, "49.39%"; "-" for NaN.
std::string format_percent(double ratio);

/// Solve-time, bound-ratio and redispatch tables as aligned text.
std::string render_tables(const std::vector<AggregateRow>& rows);

/// Writes <stem>.csv, <stem>.json, <stem>_summary.csv (aggregates, with the
/// time-limit count in its own column) and <stem>.txt into `dir`, creating it.
/// Throws std::runtime_error on write failures.
void write_reports(const std::vector<ResultRecord>& records, const std::filesystem::path& dir,
                   const std::string& stem);

// ---------------------------------------------------------------------------

/// Runs `count` jobs on up to `threads` workers; job(i) must not throw.
void parallel_for(int count, int threads, const std::function<void(int)>& job);

/// GRIDSHED_THREADS when set to a positive integer, else `requested`.
int effective_threads(int requested);

}  // namespace gridshed
