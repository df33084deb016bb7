#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "gridshed/conic_instance.hpp"

namespace gridshed {

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit, kNumericalFailure };

const char* to_string(LpStatus status);

struct LpOptions {
  double primal_tol = 1e-9;
  double dual_tol = 1e-9;
  double pivot_tol = 1e-9;
  long max_iterations = 200000;
  int refactor_interval = 40;
  // Stand-in bound for columns that are unbounded in a direction the dual
  // simplex needs; an optimum resting on it is reported as kUnbounded.
  double artificial_bound = 1e7;
};

/// Simplex basis snapshot: status per structural column, then per row.
/// Rows are matched by id on restore; rows added after the snapshot are
/// taken as basic.
struct LpBasis {
  std::vector<std::uint8_t> status;
  std::vector<long> row_ids;
  bool empty() const { return status.empty(); }
};

/// Bounded dual simplex for
///   min c'x  s.t.  row_lo <= A x <= row_hi,  col_lo <= x <= col_hi.
///
/// Rows may be appended between solves and column bounds changed freely;
/// the next solve restarts from the current basis, which stays dual
/// feasible under both operations. The basis matrix is held as a sparse LU
/// factorization plus a product-form eta file, and leaving rows are priced
/// by dual steepest edge.
class DualSimplex {
 public:
  explicit DualSimplex(int num_cols, LpOptions options = {});
  ~DualSimplex();
  DualSimplex(const DualSimplex&);
  DualSimplex& operator=(const DualSimplex&);
  DualSimplex(DualSimplex&&) noexcept;
  DualSimplex& operator=(DualSimplex&&) noexcept;

  int num_cols() const { return n_; }
  int num_rows() const { return m_; }

  void set_objective(std::span<const double> cost);
  void set_col_bounds(int col, double lower, double upper);
  double col_lower(int col) const { return lo_[col]; }
  double col_upper(int col) const { return hi_[col]; }
  int add_row(std::span<const Term> terms, double lower, double upper);
  /// Drops the listed rows whose logical variable is basic; the others are
  /// kept. Returns the number removed. Later rows shift down.
  int remove_rows(std::span<const int> rows);
  bool row_basic(int row) const { return status_[n_ + row] == kBasic; }
  /// Row activity at the last solve.
  double row_activity(int row) const { return x_[n_ + row]; }

  LpStatus solve();
  /// Pivot cap for later solves; kIterationLimit leaves a dual feasible point
  /// whose objective bounds the optimum from below.
  void set_iteration_limit(long limit) { opt_.max_iterations = limit; }
  long iteration_limit() const { return opt_.max_iterations; }

  /// Structural part of the current point.
  std::span<const double> primal() const { return {x_.data(), static_cast<std::size_t>(n_)}; }
  double objective() const;
  long iterations() const { return total_iterations_; }

  LpBasis basis() const;
  /// A snapshot that no longer fits the rows (a nonbasic row was removed)
  /// leaves the current basis in place.
  void set_basis(const LpBasis& basis);
  /// Discards the factorization and starts the next solve from the slack basis.
  void reset_basis();

 private:
  // One update of the factored basis. A pivot replaces the column at basis
  // position `row`; a border appends row `row` with its slack basic, and
  // `column` then holds the row's coefficients by basis position.
  struct Eta {
    int row;
    double pivot;
    std::vector<std::pair<int, double>> column;  // off-pivot entries of B^-1 a_q
    bool border = false;
  };
  struct Factor;

  enum Status : std::uint8_t { kBasic = 0, kAtLower = 1, kAtUpper = 2, kFreeZero = 3 };

  bool refactor();
  void install_slack_basis();
  void ftran(std::vector<double>& v) const;
  void btran(std::vector<double>& v) const;
  void column_of(int var, std::vector<double>& dense) const;
  double dot_column(int var, const std::vector<double>& y) const;
  void compute_primal();
  void compute_duals();
  bool repair_dual_infeasibility();
  void place_nonbasic(int var);
  double bound_for_status(int var) const;
  LpStatus iterate();
  bool at_artificial_bound() const;
  double signed_reduced_cost(int var) const;

  LpOptions opt_;
  int n_ = 0;
  int m_ = 0;
  std::vector<std::vector<std::pair<int, double>>> col_entries_;  // structural columns
  std::vector<std::vector<std::pair<int, double>>> row_entries_;
  std::vector<double> lo_, hi_, cost_, x_, d_;
  std::vector<std::uint8_t> artificial_lo_, artificial_hi_;
  std::vector<std::uint8_t> status_;
  std::vector<int> head_;  // basic variable per basis position
  std::vector<int> pos_;   // basis position per variable, -1 if nonbasic
  std::vector<double> weight_;
  std::vector<long> row_ids_;
  long next_row_id_ = 0;

  std::unique_ptr<Factor> factor_;
  std::vector<Eta> etas_;
  int pivot_etas_ = 0;
  bool factor_valid_ = false;
  bool primal_dirty_ = true;
  long total_iterations_ = 0;
};

}  // namespace gridshed
