#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace gridshed {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense { kLessEqual, kEqual, kGreaterEqual };
enum class ObjectiveSense { kMaximize, kMinimize };

struct Term {
  int col = 0;
  double coef = 0.0;
  bool operator==(const Term&) const = default;
};

struct LinearRow {
  std::string name;
  std::vector<Term> terms;
  RowSense sense = RowSense::kLessEqual;
  double rhs = 0.0;

  double activity(std::span<const double> x) const;
  bool operator==(const LinearRow&) const = default;
};

/// Rotated second-order cone membership
///   sum_k (lhs_k.coef * x[lhs_k.col])^2 <= (rhs_a.coef * x[rhs_a.col]) * (rhs_b.coef * x[rhs_b.col])
/// with both right-hand factors nonnegative. `rhs_a` and `rhs_b` may name the
/// same column, which encodes a plain norm bound ||lhs|| <= rhs_a.coef * x.
struct RotatedCone {
  std::string name;
  std::vector<Term> lhs;
  Term rhs_a;
  Term rhs_b;

  bool operator==(const RotatedCone&) const = default;
};

struct Column {
  std::string name;
  double lower = 0.0;
  double upper = kInf;
  bool integer = false;
  bool operator==(const Column&) const = default;
};

/// Standard-form mixed-integer conic program. Plain value type; builders
/// append to it and solvers only read it.
struct ConicMipInstance {
  std::string name;
  ObjectiveSense sense = ObjectiveSense::kMaximize;
  std::vector<Column> columns;
  std::vector<double> objective;  // one coefficient per column
  std::vector<LinearRow> rows;
  std::vector<RotatedCone> cones;

  int num_columns() const { return static_cast<int>(columns.size()); }
  int add_column(std::string col_name, double lower, double upper, bool integer = false);
  void add_rows(std::vector<LinearRow> block);
  void add_cones(std::vector<RotatedCone> block);
  std::vector<int> integer_columns() const;
  double objective_value(std::span<const double> x) const;

  bool operator==(const ConicMipInstance&) const = default;
};

/// Structural problems: dangling column references, inverted bounds,
/// repeated columns inside a cone, objective length mismatch. Empty when valid.
std::vector<std::string> validate(const ConicMipInstance& instance);

inline constexpr int kInstanceFormatVersion = 1;

nlohmann::json to_json(const ConicMipInstance& instance);
/// Throws ParseError on malformed documents or version mismatch.
ConicMipInstance instance_from_json(const nlohmann::json& j);

void serialize(const ConicMipInstance& instance, const std::filesystem::path& path);
ConicMipInstance deserialize(const std::filesystem::path& path);

/// CPLEX LP text for instances without cones; throws BuildError otherwise.
std::string to_lp_format(const ConicMipInstance& instance);
void write_lp(const ConicMipInstance& instance, const std::filesystem::path& path);

/// Worst violation per constraint class. Cone violation is
/// ||lhs|| - sqrt(a * b) (plus any negativity of a or b).
struct ViolationReport {
  double linear = 0.0;
  double cone = 0.0;
  double bounds = 0.0;
  double integrality = 0.0;
  int worst_row = -1;
  int worst_cone = -1;

  double max() const;
  bool feasible(double tol) const { return max() <= tol; }
};

double cone_violation(const RotatedCone& cone, std::span<const double> x);
ViolationReport check_point(const ConicMipInstance& instance, std::span<const double> x);

}  // namespace gridshed
