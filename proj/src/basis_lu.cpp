#include "basis_lu.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridshed::detail {

namespace {

constexpr double kThreshold = 0.1;   // relative pivot threshold within a column
constexpr double kTiny = 1e-11;      // absolute pivot floor
constexpr double kDrop = 1e-14;      // fill entries below this are dropped
constexpr int kSearchColumns = 4;    // Markowitz candidates examined per pivot

}  // namespace

bool BasisLu::factorize(int m, const std::vector<const Column*>& columns) {
  m_ = m;
  prow_.assign(m, -1);
  pcol_.assign(m, -1);
  piv_.assign(m, 0.0);
  l_start_.assign(1, 0);
  l_idx_.clear();
  l_val_.clear();
  u_start_.assign(1, 0);
  u_idx_.clear();
  u_val_.clear();
  work_.assign(m, 0.0);

  // Active submatrix: values by column, pattern by row.
  auto reset = [m](auto& lists) {
    if (static_cast<int>(lists.size()) < m) lists.resize(m);
    for (int k = 0; k < m; ++k) lists[k].clear();
  };
  reset(col_rows_);
  reset(row_cols_);
  reset(col_vals_);
  auto& col_rows = col_rows_;
  auto& row_cols = row_cols_;
  auto& col_vals = col_vals_;
  for (int c = 0; c < m; ++c) {
    for (const auto& [r, v] : *columns[c]) {
      if (v == 0.0) continue;
      col_rows[c].push_back(r);
      col_vals[c].push_back(v);
      row_cols[r].push_back(c);
    }
  }
  std::vector<char> row_done(m, 0), col_done(m, 0);
  std::vector<int> col_stack, row_stack;
  for (int c = 0; c < m; ++c) {
    if (col_rows[c].size() == 1) col_stack.push_back(c);
  }
  for (int r = 0; r < m; ++r) {
    if (row_cols[r].size() == 1) row_stack.push_back(r);
  }

  auto find_in_col = [&](int c, int r) {
    const auto& rows = col_rows[c];
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (rows[k] == r) return static_cast<int>(k);
    }
    return -1;
  };
  auto col_max = [&](int c) {
    double mx = 0.0;
    for (double v : col_vals[c]) mx = std::max(mx, std::abs(v));
    return mx;
  };

  std::vector<double> u_row_vals;
  std::vector<int> u_row_cols;
  std::vector<int> bump;
  bool bump_built = false;
  std::vector<int> where(m, -1);  // row -> slot in the column being updated
  for (int step = 0; step < m; ++step) {
    int pr = -1, pc = -1;

    while (!col_stack.empty() && pr < 0) {
      const int c = col_stack.back();
      col_stack.pop_back();
      if (col_done[c] || col_rows[c].size() != 1) continue;
      if (std::abs(col_vals[c][0]) < kTiny) continue;
      pc = c;
      pr = col_rows[c][0];
    }
    while (!row_stack.empty() && pr < 0) {
      const int r = row_stack.back();
      row_stack.pop_back();
      if (row_done[r] || row_cols[r].size() != 1) continue;
      const int c = row_cols[r][0];
      const int k = find_in_col(c, r);
      if (k < 0) continue;
      const double a = std::abs(col_vals[c][k]);
      if (a < kTiny || a < kThreshold * col_max(c)) continue;
      pc = c;
      pr = r;
    }
    if (pr < 0) {
      // Markowitz search over the active columns of smallest count. The
      // candidate list is built once singletons run out and only shrinks.
      if (!bump_built) {
        bump.clear();
        for (int c = 0; c < m; ++c) {
          if (!col_done[c]) bump.push_back(c);
        }
        bump_built = true;
      }
      std::erase_if(bump, [&](int c) { return col_done[c] != 0; });
      int min_count = m + 1;
      for (int c : bump) {
        const int count = static_cast<int>(col_rows[c].size());
        if (count == 0) return false;
        min_count = std::min(min_count, count);
      }
      long best_cost = std::numeric_limits<long>::max();
      double best_abs = 0.0;
      int examined = 0;
      for (int c : bump) {
        if (examined >= kSearchColumns) break;
        const auto& rows = col_rows[c];
        if (static_cast<int>(rows.size()) > min_count + 1) continue;
        ++examined;
        const long cc = static_cast<long>(rows.size()) - 1;
        const double mx = col_max(c);
        if (mx < kTiny) return false;
        for (std::size_t k = 0; k < rows.size(); ++k) {
          const double a = std::abs(col_vals[c][k]);
          if (a < kThreshold * mx) continue;
          const long cost = cc * (static_cast<long>(row_cols[rows[k]].size()) - 1);
          if (cost < best_cost || (cost == best_cost && a > best_abs)) {
            best_cost = cost;
            best_abs = a;
            pc = c;
            pr = rows[k];
          }
        }
      }
      if (pr < 0) return false;
    }

    // Pivot column entries other than the pivot become the L column.
    const int kp = find_in_col(pc, pr);
    const double pivot = col_vals[pc][kp];
    prow_[step] = pr;
    pcol_[step] = pc;
    piv_[step] = pivot;
    auto& prows = col_rows[pc];
    auto& pvals = col_vals[pc];
    const std::size_t l_begin = l_idx_.size();
    for (std::size_t k = 0; k < prows.size(); ++k) {
      if (static_cast<int>(k) == kp) continue;
      l_idx_.push_back(prows[k]);
      l_val_.push_back(pvals[k] / pivot);
    }
    l_start_.push_back(static_cast<int>(l_idx_.size()));
    col_done[pc] = 1;
    for (int r : prows) {
      auto& rc = row_cols[r];
      const auto it = std::find(rc.begin(), rc.end(), pc);
      if (it != rc.end()) {
        *it = rc.back();
        rc.pop_back();
      }
      if (r != pr && rc.size() == 1) row_stack.push_back(r);
    }
    prows.clear();
    pvals.clear();

    // Pivot row entries become the U row; eliminate below the pivot.
    row_done[pr] = 1;
    u_row_cols.clear();
    u_row_vals.clear();
    for (int c : row_cols[pr]) {
      const int k = find_in_col(c, pr);
      u_row_cols.push_back(c);
      u_row_vals.push_back(col_vals[c][k]);
      auto& rows = col_rows[c];
      auto& vals = col_vals[c];
      rows[k] = rows.back();
      vals[k] = vals.back();
      rows.pop_back();
      vals.pop_back();
    }
    row_cols[pr].clear();
    const bool has_l = l_begin < l_idx_.size();
    for (std::size_t t = 0; t < u_row_cols.size(); ++t) {
      const int c = u_row_cols[t];
      const double u = u_row_vals[t];
      u_idx_.push_back(c);
      u_val_.push_back(u);
      if (has_l) {
        auto& rows = col_rows[c];
        auto& vals = col_vals[c];
        for (std::size_t k = 0; k < rows.size(); ++k) where[rows[k]] = static_cast<int>(k);
        for (std::size_t q = l_begin; q < l_idx_.size(); ++q) {
          const int r = l_idx_[q];
          const double delta = -l_val_[q] * u;
          const int k = where[r];
          if (k >= 0) {
            vals[k] += delta;
          } else if (std::abs(delta) > kDrop) {
            where[r] = static_cast<int>(rows.size());
            rows.push_back(r);
            vals.push_back(delta);
            row_cols[r].push_back(c);
          }
        }
        for (int r : rows) where[r] = -1;
      }
      if (col_rows[c].size() == 1) col_stack.push_back(c);
    }
    u_start_.push_back(static_cast<int>(u_idx_.size()));
  }
  return true;
}

void BasisLu::ftran(std::vector<double>& v) const {
  for (int k = 0; k < m_; ++k) {
    const double y = v[prow_[k]];
    if (y == 0.0) continue;
    for (int q = l_start_[k]; q < l_start_[k + 1]; ++q) v[l_idx_[q]] -= l_val_[q] * y;
  }
  for (int k = m_ - 1; k >= 0; --k) {
    double s = v[prow_[k]];
    for (int q = u_start_[k]; q < u_start_[k + 1]; ++q) s -= u_val_[q] * work_[u_idx_[q]];
    work_[pcol_[k]] = s / piv_[k];
  }
  std::copy(work_.begin(), work_.begin() + m_, v.begin());
}

void BasisLu::btran(std::vector<double>& v) const {
  for (int k = 0; k < m_; ++k) {
    const double w = v[pcol_[k]] / piv_[k];
    work_[prow_[k]] = w;
    if (w == 0.0) continue;
    for (int q = u_start_[k]; q < u_start_[k + 1]; ++q) v[u_idx_[q]] -= u_val_[q] * w;
  }
  for (int k = m_ - 1; k >= 0; --k) {
    double s = 0.0;
    for (int q = l_start_[k]; q < l_start_[k + 1]; ++q) s += l_val_[q] * work_[l_idx_[q]];
    work_[prow_[k]] -= s;
  }
  std::copy(work_.begin(), work_.begin() + m_, v.begin());
}

}  // namespace gridshed::detail
