#pragma once

#include <utility>
#include <vector>

namespace gridshed::detail {

/// Sparse LU of a square simplex basis, P B Q = L U.
///
/// Pivots are taken from column singletons first (slack columns end up
/// there), then row singletons, then by a Markowitz search with threshold
/// partial pivoting over what remains. Bases of network LPs are close to
/// triangular, so the Markowitz phase usually touches a small bump.
class BasisLu {
 public:
  using Column = std::vector<std::pair<int, double>>;  // (row, value)

  /// Returns false when the matrix is numerically singular.
  bool factorize(int m, const std::vector<const Column*>& columns);

  /// v in row space in, B^-1 v in basis-position space out. Entries past
  /// size() are left alone.
  void ftran(std::vector<double>& v) const;
  /// v in basis-position space in, B^-T v in row space out.
  void btran(std::vector<double>& v) const;

  int size() const { return m_; }
  long fill() const { return static_cast<long>(l_idx_.size() + u_idx_.size()); }

 private:
  int m_ = 0;
  std::vector<int> prow_, pcol_;  // pivot row and column per step
  std::vector<double> piv_;
  std::vector<int> l_start_, l_idx_;
  std::vector<double> l_val_;
  std::vector<int> u_start_, u_idx_;
  std::vector<double> u_val_;
  mutable std::vector<double> work_;
  // Active-submatrix scratch, kept between factorizations for its capacity.
  std::vector<std::vector<int>> col_rows_, row_cols_;
  std::vector<std::vector<double>> col_vals_;
};

}  // namespace gridshed::detail
