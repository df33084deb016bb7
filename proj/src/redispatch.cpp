#include "gridshed/redispatch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gridshed/errors.hpp"

namespace gridshed {

RedispatchReport evaluate(const Network& net, std::uint64_t seed, FormulationKind kind,
                          const SolveResult& ops, const VariableMap& vmap,
                          NodeRelaxationSolver& node_solver, const RedispatchOptions& options) {
  if (!ops.has_solution()) throw InputError("OPS result carries no solution to redispatch");
  RedispatchReport report;
  report.seed = seed;
  report.kind = kind;
  report.perf_ratio = std::numeric_limits<double>::quiet_NaN();
  report.topology = extract_topology(net, vmap, ops.x, options.switch_tol);
  report.estimated = load_term(net, vmap, ops.x);

  const Formulation model = build_redispatch(net, report.topology);
  const SolveResult res = solve(model.instance, options.config, node_solver);
  report.status = res.status;
  if (res.status == SolveStatus::kOptimal && res.has_solution()) {
    report.feasible = true;
    report.delivered = load_term(net, model.vmap, res.x);
    if (report.estimated > 0.0) report.perf_ratio = report.delivered / report.estimated;
  } else {
    report.diagnostics = std::string(to_string(res.status));
    if (!res.message.empty()) report.diagnostics += ": " + res.message;
  }
  return report;
}

RedispatchReport evaluate(const Network& net, std::uint64_t seed, FormulationKind kind,
                          const SolveResult& ops, const VariableMap& vmap) {
  OuterApproximationSolver node_solver;
  return evaluate(net, seed, kind, ops, vmap, node_solver);
}

double bound_ratio(const SolveResult& ops, double best_soc_bound) {
  if (!ops.has_solution()) throw InputError("OPS result carries no objective");
  if (!(best_soc_bound > 0.0) || !std::isfinite(best_soc_bound)) {
    throw InputError("best SOC bound must be positive and finite");
  }
  return ops.objective / best_soc_bound;
}

double best_soc_bound(std::span<const SolveResult> exact_runs) {
  double best = std::numeric_limits<double>::infinity();
  for (const SolveResult& r : exact_runs) {
    if (r.status != SolveStatus::kOptimal && r.status != SolveStatus::kFeasibleAtLimit) continue;
    if (std::isfinite(r.best_bound)) best = std::min(best, r.best_bound);
  }
  if (!std::isfinite(best)) throw InputError("no exact run produced a bound");
  return best;
}

}  // namespace gridshed
