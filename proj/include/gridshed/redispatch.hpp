#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "gridshed/formulation.hpp"
#include "gridshed/mip_solver.hpp"
#include "gridshed/network.hpp"

namespace gridshed {

/// Outcome of re-solving one OPS solution's topology under the exact
/// perspective model with a load-only objective.
struct RedispatchReport {
  std::uint64_t seed = 0;
  FormulationKind kind = FormulationKind::kSocOps;
  bool feasible = false;
  double delivered = 0.0;  // load share after redispatch
  double estimated = 0.0;  // load share claimed by the OPS solution
  // delivered / estimated; NaN when infeasible or estimated is zero.
  double perf_ratio = 0.0;
  SolveStatus status = SolveStatus::kError;
  std::string diagnostics;  // solver message when the redispatch failed
  Topology topology;
};

struct RedispatchOptions {
  double switch_tol = 1e-6;  // rounding window for switch values
  BnbConfig config;          // the redispatch model is continuous; only limits matter
};

/// Fixes the switches of `ops` and maximizes delivered load. Infeasibility
/// and solver failures are recorded in the report. Throws InputError when
/// `ops` has no solution or a switch value is not within `switch_tol` of 0/1.
RedispatchReport evaluate(const Network& net, std::uint64_t seed, FormulationKind kind,
                          const SolveResult& ops, const VariableMap& vmap,
                          NodeRelaxationSolver& node_solver, const RedispatchOptions& options = {});

RedispatchReport evaluate(const Network& net, std::uint64_t seed, FormulationKind kind,
                          const SolveResult& ops, const VariableMap& vmap);

/// OPS objective over the best exact bound. Throws InputError when the
/// bound is not positive or `ops` has no solution.
double bound_ratio(const SolveResult& ops, double best_soc_bound);

/// Smallest best_bound among the given exact runs that produced one, which
/// is the tightest valid upper bound for a maximization. Throws InputError
/// when none qualifies.
double best_soc_bound(std::span<const SolveResult> exact_runs);

}  // namespace gridshed
