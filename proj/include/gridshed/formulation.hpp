#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridshed/conic_instance.hpp"
#include "gridshed/network.hpp"

namespace gridshed {

enum class FormulationKind {
  kSocOps,      // exact, product-relaxed voltage cones
  kSocOpsP,     // exact, perspective voltage cone
  kSocOpsT,     // perspective cone, linearized thermal limits
  kSocOpsM,     // fully linear, McCormick voltage envelope
  kSocOpsS,     // fully linear, secant voltage bound
  kDcOps,       // DC power flow baseline
  kRedispatch,  // perspective model with every switch fixed
};

const char* to_string(FormulationKind kind);
/// Accepts the display names ("SOC-OPS-P", "DC-OPS", ...) case-insensitively,
/// with or without the "SOC-OPS-" prefix for the relaxed kinds ("P", "T", "M", "S").
std::optional<FormulationKind> parse_formulation_kind(std::string_view text);

/// Column index of every decision variable; -1 where the formulation does not
/// use that variable. Per-line vectors are indexed like Network::lines().
struct VariableMap {
  std::vector<int> z_bus, z_line, z_gen;
  std::vector<int> x_load, x_shunt;
  std::vector<int> p_gen, q_gen;
  std::vector<int> p_fr, p_to, q_fr, q_to;  // P^L_ij, P^L_ji, Q^L_ij, Q^L_ji
  std::vector<int> w_bus;                   // W_ii
  std::vector<int> w_fr, w_to, w_re, w_im;  // W^Fr, W^To, W^R, W^I
  std::vector<int> w_shunt;                 // W^S
  std::vector<int> yp_fr, yq_fr, yp_to, yq_to;
  std::vector<int> y_re, y_im, y_sum;
  std::vector<int> theta;  // bus angles, DC only

  /// Inverse lookup: symbol name (e.g. "W_R[3]") of a column.
  std::vector<std::string> symbols;

  int num_columns() const { return static_cast<int>(symbols.size()); }
  const std::string& symbol(int col) const { return symbols.at(col); }
  /// Every column index held by the map, in allocation order.
  std::vector<int> all_columns() const;
};

/// Per-line bounds implied by voltage and angle limits.
struct LineBounds {
  double wr_lo = 0.0, wr_hi = 0.0;
  double wi_lo = 0.0, wi_hi = 0.0;
  double wfr_lo = 0.0, wfr_hi = 0.0;
  double wto_lo = 0.0, wto_hi = 0.0;
  double secant_lo = 0.0, secant_hi = 0.0;  // bounds of (W^Fr + W^To) / 2
};

/// Bounds for every line: W^R in [Vmin_i Vmin_j cos(max|angle|), Vmax_i Vmax_j],
/// W^I in [Vmax_i Vmax_j sin(angmin), Vmax_i Vmax_j sin(angmax)], and the
/// squared-voltage boxes of each end. Throws BuildError for angle limits
/// outside (-pi/2, pi/2).
std::vector<LineBounds> derive_bounds(const Network& net);

/// Union of uniform grids (endpoints included) used for every linearized
/// square. A single entry n gives the n-point grid; several entries give
/// the union of their grids, so adding entries only adds cuts.
struct Linearization {
  std::vector<int> grid_sizes{5};

  static Linearization uniform(int points) { return Linearization{{points}}; }
  /// Sorted, de-duplicated points over [lo, hi].
  std::vector<double> points(double lo, double hi) const;
};

// Constraint blocks. Each appends nothing itself; the caller adds the result
// to the instance that owns the columns referenced by `vmap`.

/// Load-delivery minus risk objective (maximize). Risk values are taken from
/// `scenario` (or the network's own line risks when the scenario is empty).
/// Throws BuildError when total weighted demand or total risk is zero.
std::vector<double> build_objective(const Network& net, const RiskScenario& scenario, double alpha,
                                    const VariableMap& vmap, int num_columns);
std::vector<LinearRow> build_energization(const Network& net, const VariableMap& vmap);
std::vector<LinearRow> build_generation(const Network& net, const VariableMap& vmap);
/// Bus balance rows (real and reactive) plus the shunt envelope rows.
std::vector<LinearRow> build_power_balance(const Network& net, const VariableMap& vmap);
std::vector<LinearRow> build_branch_flow(const Network& net, const VariableMap& vmap);

struct ConicBlock {
  std::vector<LinearRow> rows;
  std::vector<RotatedCone> cones;
};

/// Voltage bounds, linking and angle rows, plus the voltage cones for
/// `kind` (three product-relaxed cones for kSocOps, the perspective cone for
/// kSocOpsP/T/kRedispatch, none for the linear kinds).
ConicBlock build_voltage_block(const Network& net, const VariableMap& vmap, FormulationKind kind);

/// Per-direction thermal cones P^2 + Q^2 <= (T z)^2.
std::vector<RotatedCone> build_thermal_cones(const Network& net, const VariableMap& vmap);

struct Formulation {
  ConicMipInstance instance;
  VariableMap vmap;
  FormulationKind kind = FormulationKind::kSocOps;
};

/// Assembles one of the SOC-family or DC models. kRedispatch is rejected
/// (use build_redispatch).
Formulation build_formulation(const Network& net, const RiskScenario& scenario, double alpha,
                              FormulationKind kind, const Linearization& lin = {});
Formulation build_formulation(const Network& net, const RiskScenario& scenario, double alpha,
                              FormulationKind kind, int lin_points);

/// DC baseline: bus angles, big-M switched flow equations, real power only.
Formulation build_dc_ops(const Network& net, const RiskScenario& scenario, double alpha);

/// On/off state of every switchable component.
struct Topology {
  std::vector<int> bus, line, gen;  // 0 or 1

  static Topology all_on(const Network& net);
  bool operator==(const Topology&) const = default;
};

/// Reads the switch values from a solution, rounding values within `tol` of
/// 0 or 1. Throws InputError for anything else.
Topology extract_topology(const Network& net, const VariableMap& vmap, std::span<const double> x,
                          double tol = 1e-6);

/// Throws InputError if a line or generator is on at a bus that is off.
void check_topology(const Network& net, const Topology& topology);

/// Perspective model with all switches fixed and a load-only objective.
Formulation build_redispatch(const Network& net, const Topology& topology);

/// Load-delivery share sum(w_d Pd x_d) / total weighted demand at `x`.
double load_term(const Network& net, const VariableMap& vmap, std::span<const double> x);

}  // namespace gridshed
