#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridshed/conic_instance.hpp"
#include "gridshed/formulation.hpp"

namespace gridshed {

/// n evenly spaced points over [lo, hi], endpoints included (n >= 2).
std::vector<double> uniform_points(double lo, double hi, int n);

/// Tangent under-estimators of x^2: one row y >= 2 l x - l^2 z per point l.
/// Throws BuildError on an empty point list.
std::vector<LinearRow> tangent_cuts(int y_col, int x_col, int z_col, std::span<const double> points,
                                    const std::string& name = "tan");

/// Same cut around a linear expression e: y >= 2 l e - l^2 z.
std::vector<LinearRow> tangent_cuts(int y_col, std::span<const Term> expr, int z_col,
                                    std::span<const double> points, const std::string& name);

/// Budget rows y^P + y^Q <= T^2 z and tangent cuts on P and Q (points over
/// [-T, T]) for both flow directions of every line.
std::vector<LinearRow> thermal_linearization(const Network& net, const VariableMap& vmap,
                                             const Linearization& lin);

/// Tangent cuts on W^R and W^I over their derived bounds.
std::vector<LinearRow> voltage_quadratic_cuts(const Network& net, const VariableMap& vmap,
                                              const Linearization& lin);

/// Two upper McCormick rows for y^WR + y^WI <= W^Fr W^To.
std::vector<LinearRow> mccormick_voltage(const Network& net, const VariableMap& vmap);

/// Tangent cuts on the half-difference (W^To - W^Fr)/2 and the secant row
/// y^WR + y^WI + y^WSum <= (u + l)(W^Fr + W^To)/2 - l u z.
std::vector<LinearRow> secant_voltage(const Network& net, const VariableMap& vmap,
                                      const Linearization& lin);

// Scalar right-hand sides, exposed for property checks.
double tangent_value(double l, double x, double z = 1.0);
double mccormick_upper_1(double fr, double to, double fr_lo, double to_hi, double z = 1.0);
double mccormick_upper_2(double fr, double to, double to_lo, double fr_hi, double z = 1.0);
double secant_value(double s, double lo, double hi, double z = 1.0);

/// Gradient hyperplane of the cone's standard form at `point`, as a
/// homogeneous row `sum coef x <= 0`, scaled so its largest coefficient has
/// magnitude 1. Valid for every cone point. Empty when the gradient is
/// undefined (point at the cone vertex).
std::optional<LinearRow> cone_supporting_row(const RotatedCone& cone, std::span<const double> point);

/// Separating row for a point that violates the cone by more than `tol`;
/// none when the point is (tol-)feasible. When a right-hand factor is
/// identically zero (zero coefficient, or a column fixed at 0 in `columns`),
/// returns the equality row forcing the largest left-hand term to zero.
std::optional<LinearRow> lazy_cone_cut(std::span<const double> point, const RotatedCone& cone,
                                       double tol = 1e-9, std::span<const Column> columns = {});

}  // namespace gridshed
