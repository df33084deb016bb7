// gridshed command-line driver: solve, redispatch, matrix, sweep.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridshed/experiment.hpp"

namespace {

using namespace gridshed;

struct Options {
  std::vector<std::string> cases;
  std::vector<std::string> formulations;
  double alpha = 0.5;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<int> lin_points{5};
  double time_limit = 300.0;
  double gap = 1e-4;
  int threads = 1;
  std::string out;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Options& o, bool many_kinds, bool many_lins) {
  cmd->add_option("--case", o.cases, "Case file or bundled case name (case14, toy3, ...)")
      ->required()
      ->delimiter(',');
  auto* f = cmd->add_option("--formulation", o.formulations,
                            "SOC-OPS, SOC-OPS-P, -T, -M, -S or DC-OPS (short forms P, T, M, S, DC)");
  f->delimiter(',');
  if (!many_kinds) f->required()->expected(1);
  cmd->add_option("--alpha", o.alpha, "Risk weight in [0, 1]")->capture_default_str();
  cmd->add_option("--seeds", o.seeds, "Risk scenario seeds, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  auto* lin = cmd->add_option("--lin-points", o.lin_points, "Linearization points per square");
  lin->delimiter(',')->capture_default_str();
  if (!many_lins) lin->expected(1);
  cmd->add_option("--time-limit", o.time_limit, "Per-solve time limit [s]")->capture_default_str();
  cmd->add_option("--gap", o.gap, "Relative optimality gap")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads (GRIDSHED_THREADS overrides)")
      ->capture_default_str();
  cmd->add_option("--out", o.out, "Directory for CSV, JSON and text reports");
  cmd->add_flag("--quiet", o.quiet, "No progress lines on stderr");
}

// Exact kinds on large cases routinely run into the time limit.
constexpr std::size_t kDeskScaleBuses = 73;

void warn_large_cases(const ExperimentPlan& plan) {
  bool exact = false;
  for (FormulationKind k : plan.kinds) {
    exact |= k == FormulationKind::kSocOps || k == FormulationKind::kSocOpsP;
  }
  if (!exact) return;
  for (const auto& path : plan.cases) {
    const std::size_t buses = load_case(path).buses().size();
    if (buses > kDeskScaleBuses) {
      std::fprintf(stderr,
                   "gridshed: warning: %s has %zu buses; exact formulations may stop at the "
                   "time limit\n",
                   path.filename().string().c_str(), buses);
    }
  }
}

ExperimentPlan make_plan(const Options& o) {
  ExperimentPlan plan;
  for (const auto& c : o.cases) plan.cases.push_back(resolve_case(c));
  plan.seeds = o.seeds;
  for (const auto& name : o.formulations) {
    const auto kind = parse_formulation_kind(name);
    if (!kind || *kind == FormulationKind::kRedispatch) {
      throw CLI::ValidationError("--formulation", "unknown formulation '" + name + "'");
    }
    plan.kinds.push_back(*kind);
  }
  plan.alpha = o.alpha;
  plan.lin_points = o.lin_points.front();
  plan.time_limit_s = o.time_limit;
  plan.gap = o.gap;
  plan.threads = o.threads;
  plan.out_dir = o.out;
  plan.log = o.quiet ? nullptr : &std::cerr;
  warn_large_cases(plan);
  return plan;
}

void print_records(const std::vector<ResultRecord>& records, bool with_redispatch) {
  for (const ResultRecord& r : records) {
    std::printf("%s seed %llu %s lin %d: %s objective %.8g bound %.8g gap %.3g time %.2fs nodes %ld",
                r.case_name.c_str(), static_cast<unsigned long long>(r.seed), to_string(r.kind),
                r.lin_points, to_string(r.status), r.objective, r.bound, r.gap, r.time_s, r.nodes);
    if (with_redispatch) {
      if (r.redispatch_feasible) {
        std::printf(" delivered %.6g estimated %.6g ratio %s", r.delivered, r.estimated,
                    format_percent(r.perf_ratio).c_str());
      } else if (r.has_solution()) {
        std::printf(" redispatch infeasible");
      }
    }
    if (std::isfinite(r.bound_ratio)) {
      std::printf(" bound-ratio %s", format_percent(r.bound_ratio).c_str());
    }
    if (!r.message.empty()) std::printf(" [%s]", r.message.c_str());
    std::printf("\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal power shutoff solver and experiment driver"};
  app.require_subcommand(1);
  Options solve_o, redispatch_o, matrix_o, sweep_o;
  matrix_o.formulations = {"SOC-OPS", "SOC-OPS-P", "SOC-OPS-T", "SOC-OPS-M", "SOC-OPS-S", "DC-OPS"};
  sweep_o.formulations = {"SOC-OPS-M"};
  sweep_o.lin_points = {5, 10, 15};

  auto* solve_cmd = app.add_subcommand("solve", "Solve one formulation per case and seed");
  add_common(solve_cmd, solve_o, false, false);
  auto* redispatch_cmd =
      app.add_subcommand("redispatch", "Solve, then redispatch the topology under the SOC model");
  add_common(redispatch_cmd, redispatch_o, false, false);
  auto* matrix_cmd = app.add_subcommand("matrix", "Every case x seed x formulation, with tables");
  add_common(matrix_cmd, matrix_o, true, false);
  auto* sweep_cmd =
      app.add_subcommand("sweep", "Linearization-point sweep for SOC-OPS-M or SOC-OPS-S");
  add_common(sweep_cmd, sweep_o, true, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve_cmd->parsed() || redispatch_cmd->parsed()) {
      const bool redispatch = redispatch_cmd->parsed();
      ExperimentPlan plan = make_plan(redispatch ? redispatch_o : solve_o);
      plan.redispatch = redispatch;
      plan.reference_bound = false;
      const auto records = run_matrix(plan);
      print_records(records, redispatch);
    } else if (matrix_cmd->parsed()) {
      const ExperimentPlan plan = make_plan(matrix_o);
      const auto records = run_matrix(plan);
      print_records(records, true);
      std::printf("\n%s", render_tables(aggregate(records)).c_str());
    } else if (sweep_cmd->parsed()) {
      ExperimentPlan plan = make_plan(sweep_o);
      if (plan.kinds.size() != 1) {
        throw CLI::ValidationError("--formulation", "sweep takes exactly one formulation");
      }
      const FormulationKind kind = plan.kinds.front();
      plan.lin_points = 5;
      const auto records = sweep_linearization(plan, kind, sweep_o.lin_points);
      print_records(records, true);
      std::printf("\n%s", render_tables(aggregate(records)).c_str());
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gridshed: %s\n", e.what());
    return 1;
  }
  return 0;
}
