#include "gridshed/lp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "basis_lu.hpp"

namespace gridshed {

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
    case LpStatus::kIterationLimit: return "iteration-limit";
    case LpStatus::kNumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

struct DualSimplex::Factor {
  detail::BasisLu lu;
};

DualSimplex::DualSimplex(int num_cols, LpOptions options)
    : opt_(options),
      n_(num_cols),
      col_entries_(num_cols),
      lo_(num_cols, 0.0),
      hi_(num_cols, kInf),
      cost_(num_cols, 0.0),
      x_(num_cols, 0.0),
      d_(num_cols, 0.0),
      artificial_lo_(num_cols, false),
      artificial_hi_(num_cols, false),
      status_(num_cols, kAtLower),
      pos_(num_cols, -1),
      factor_(std::make_unique<Factor>()) {}

DualSimplex::~DualSimplex() = default;

DualSimplex::DualSimplex(const DualSimplex& other)
    : opt_(other.opt_),
      n_(other.n_),
      m_(other.m_),
      col_entries_(other.col_entries_),
      row_entries_(other.row_entries_),
      lo_(other.lo_),
      hi_(other.hi_),
      cost_(other.cost_),
      x_(other.x_),
      d_(other.d_),
      artificial_lo_(other.artificial_lo_),
      artificial_hi_(other.artificial_hi_),
      status_(other.status_),
      head_(other.head_),
      pos_(other.pos_),
      weight_(other.weight_),
      row_ids_(other.row_ids_),
      next_row_id_(other.next_row_id_),
      factor_(std::make_unique<Factor>()),
      factor_valid_(false),
      primal_dirty_(true),
      total_iterations_(other.total_iterations_) {}

DualSimplex& DualSimplex::operator=(const DualSimplex& other) {
  if (this != &other) {
    DualSimplex copy(other);
    *this = std::move(copy);
  }
  return *this;
}

DualSimplex::DualSimplex(DualSimplex&&) noexcept = default;
DualSimplex& DualSimplex::operator=(DualSimplex&&) noexcept = default;

void DualSimplex::set_objective(std::span<const double> cost) {
  if (static_cast<int>(cost.size()) != n_) throw std::invalid_argument("cost size mismatch");
  std::copy(cost.begin(), cost.end(), cost_.begin());
  primal_dirty_ = true;
}

void DualSimplex::set_col_bounds(int col, double lower, double upper) {
  lo_[col] = lower;
  hi_[col] = upper;
  artificial_lo_[col] = false;
  artificial_hi_[col] = false;
  if (pos_[col] < 0) place_nonbasic(col);
  primal_dirty_ = true;
}

int DualSimplex::add_row(std::span<const Term> terms, double lower, double upper) {
  const int row = m_++;
  row_entries_.emplace_back();
  for (const Term& t : terms) {
    if (t.coef != 0.0) {
      col_entries_[t.col].emplace_back(row, t.coef);
      row_entries_.back().emplace_back(t.col, t.coef);
    }
  }
  double activity = 0.0;
  for (const Term& t : terms) activity += t.coef * x_[t.col];
  const int var = n_ + row;
  lo_.push_back(lower);
  hi_.push_back(upper);
  cost_.push_back(0.0);
  x_.push_back(activity);
  d_.push_back(0.0);
  artificial_lo_.push_back(false);
  artificial_hi_.push_back(false);
  status_.push_back(kBasic);
  pos_.push_back(static_cast<int>(head_.size()));
  head_.push_back(var);
  weight_.push_back(1.0);
  row_ids_.push_back(next_row_id_++);
  if (factor_valid_) {
    Eta border{row, -1.0, {}, true};
    for (const auto& [col, coef] : row_entries_.back()) {
      if (pos_[col] >= 0) border.column.emplace_back(pos_[col], coef);
    }
    etas_.push_back(std::move(border));
  }
  primal_dirty_ = true;
  return row;
}

int DualSimplex::remove_rows(std::span<const int> rows) {
  std::vector<char> drop(m_, 0);
  int count = 0;
  for (int r : rows) {
    if (r >= 0 && r < m_ && !drop[r] && status_[n_ + r] == kBasic) {
      drop[r] = 1;
      ++count;
    }
  }
  if (count == 0) return 0;
  std::vector<int> new_index(m_, -1);
  int next = 0;
  for (int r = 0; r < m_; ++r) {
    if (!drop[r]) new_index[r] = next++;
  }
  for (auto& entries : col_entries_) {
    std::erase_if(entries, [&](const auto& e) { return drop[e.first] != 0; });
    for (auto& e : entries) e.first = new_index[e.first];
  }
  auto compact = [&](auto& vec) {
    int out = n_;
    for (int r = 0; r < m_; ++r) {
      if (!drop[r]) vec[out++] = vec[n_ + r];
    }
    vec.resize(out);
  };
  compact(lo_);
  compact(hi_);
  compact(cost_);
  compact(x_);
  compact(d_);
  compact(artificial_lo_);
  compact(artificial_hi_);
  compact(status_);
  {
    int out = 0;
    for (int r = 0; r < m_; ++r) {
      if (!drop[r]) {
        if (out != r) row_entries_[out] = std::move(row_entries_[r]);
        row_ids_[out] = row_ids_[r];
        ++out;
      }
    }
    row_entries_.resize(out);
    row_ids_.resize(out);
  }
  std::vector<int> head;
  std::vector<double> weight;
  head.reserve(m_ - count);
  weight.reserve(m_ - count);
  for (std::size_t p = 0; p < head_.size(); ++p) {
    const int var = head_[p];
    if (var >= n_) {
      const int r = var - n_;
      if (drop[r]) continue;
      head.push_back(n_ + new_index[r]);
    } else {
      head.push_back(var);
    }
    weight.push_back(weight_[p]);
  }
  head_ = std::move(head);
  weight_ = std::move(weight);
  m_ -= count;
  pos_.assign(n_ + m_, -1);
  for (int p = 0; p < static_cast<int>(head_.size()); ++p) pos_[head_[p]] = p;
  etas_.clear();
  pivot_etas_ = 0;
  factor_valid_ = false;
  primal_dirty_ = true;
  return count;
}

double DualSimplex::bound_for_status(int var) const {
  switch (status_[var]) {
    case kAtLower: return lo_[var];
    case kAtUpper: return hi_[var];
    default: return 0.0;
  }
}

// Puts a nonbasic variable on a finite bound consistent with its status,
// falling back to the other bound (or zero) when that one is infinite.
void DualSimplex::place_nonbasic(int var) {
  const bool has_lo = std::isfinite(lo_[var]);
  const bool has_hi = std::isfinite(hi_[var]);
  if (status_[var] == kAtUpper && !has_hi) status_[var] = has_lo ? kAtLower : kFreeZero;
  if (status_[var] == kAtLower && !has_lo) status_[var] = has_hi ? kAtUpper : kFreeZero;
  if (status_[var] == kFreeZero && (has_lo || has_hi)) status_[var] = has_lo ? kAtLower : kAtUpper;
  x_[var] = bound_for_status(var);
}

void DualSimplex::install_slack_basis() {
  head_.assign(m_, 0);
  for (int i = 0; i < m_; ++i) {
    const int var = n_ + i;
    head_[i] = var;
    pos_[var] = i;
    status_[var] = kBasic;
  }
  for (int j = 0; j < n_; ++j) {
    pos_[j] = -1;
    // Cost sign picks the dual-feasible bound.
    status_[j] = cost_[j] < 0.0 ? kAtUpper : kAtLower;
    place_nonbasic(j);
  }
  weight_.assign(m_, 1.0);
  factor_valid_ = false;
  primal_dirty_ = true;
}

void DualSimplex::reset_basis() { install_slack_basis(); }
LpBasis DualSimplex::basis() const { return LpBasis{status_, row_ids_}; }

void DualSimplex::set_basis(const LpBasis& basis) {
  const int total = n_ + m_;
  if (basis.empty() || static_cast<int>(basis.status.size()) < n_ ||
      basis.status.size() != n_ + basis.row_ids.size()) {
    install_slack_basis();
    return;
  }
  std::vector<std::uint8_t> status(total, kBasic);
  std::copy(basis.status.begin(), basis.status.begin() + n_, status.begin());
  // Row ids increase in both lists, so a merge walk matches them.
  std::size_t k = 0;
  for (int r = 0; r < m_; ++r) {
    while (k < basis.row_ids.size() && basis.row_ids[k] < row_ids_[r]) ++k;
    if (k < basis.row_ids.size() && basis.row_ids[k] == row_ids_[r]) status[n_ + r] = basis.status[n_ + k];
  }
  if (status == status_ && static_cast<int>(head_.size()) == m_) return;  // keep the factorization
  int basics = 0;
  for (auto s : status) basics += s == kBasic ? 1 : 0;
  if (basics != m_) return;
  status_ = std::move(status);
  head_.clear();
  for (int var = 0; var < total; ++var) {
    if (status_[var] == kBasic) {
      pos_[var] = static_cast<int>(head_.size());
      head_.push_back(var);
    } else {
      pos_[var] = -1;
      place_nonbasic(var);
    }
  }
  weight_.assign(m_, 1.0);
  factor_valid_ = false;
  primal_dirty_ = true;
}

bool DualSimplex::refactor() {
  etas_.clear();
  pivot_etas_ = 0;
  factor_valid_ = false;
  if (m_ == 0) {
    factor_valid_ = true;
    return true;
  }
  std::vector<detail::BasisLu::Column> slack(m_);
  std::vector<const detail::BasisLu::Column*> columns(m_);
  for (int p = 0; p < m_; ++p) {
    const int var = head_[p];
    if (var < n_) {
      columns[p] = &col_entries_[var];
    } else {
      slack[p].emplace_back(var - n_, -1.0);
      columns[p] = &slack[p];
    }
  }
  if (!factor_->lu.factorize(m_, columns)) return false;
  factor_valid_ = true;

  // Reject numerically singular bases by a residual check on a probe vector.
  std::vector<double> sol(m_, 1.0);
  factor_->lu.ftran(sol);
  std::vector<double> residual(m_, -1.0);
  double sol_max = 0.0;
  for (int p = 0; p < m_; ++p) {
    if (!std::isfinite(sol[p])) {
      factor_valid_ = false;
      return false;
    }
    sol_max = std::max(sol_max, std::abs(sol[p]));
    for (const auto& [row, val] : *columns[p]) residual[row] += val * sol[p];
  }
  double worst = 0.0;
  for (double r : residual) worst = std::max(worst, std::abs(r));
  if (worst > 1e-6 * (1.0 + sol_max)) {
    factor_valid_ = false;
    return false;
  }
  return true;
}

void DualSimplex::ftran(std::vector<double>& v) const {
  if (m_ == 0) return;
  factor_->lu.ftran(v);
  for (const Eta& eta : etas_) {
    if (eta.border) {
      double sum = -v[eta.row];
      for (const auto& [q, a] : eta.column) sum += a * v[q];
      v[eta.row] = sum;
      continue;
    }
    const double pivot_value = v[eta.row] / eta.pivot;
    if (pivot_value != 0.0) {
      for (const auto& [i, w] : eta.column) v[i] -= w * pivot_value;
    }
    v[eta.row] = pivot_value;
  }
}

void DualSimplex::btran(std::vector<double>& v) const {
  if (m_ == 0) return;
  for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
    if (it->border) {
      const double g = v[it->row];
      if (g != 0.0) {
        for (const auto& [q, a] : it->column) v[q] += g * a;
      }
      v[it->row] = -g;
      continue;
    }
    double sum = v[it->row];
    for (const auto& [i, w] : it->column) sum -= w * v[i];
    v[it->row] = sum / it->pivot;
  }
  factor_->lu.btran(v);
}

void DualSimplex::column_of(int var, std::vector<double>& dense) const {
  std::fill(dense.begin(), dense.end(), 0.0);
  if (var < n_) {
    for (const auto& [row, val] : col_entries_[var]) dense[row] = val;
  } else {
    dense[var - n_] = -1.0;
  }
}

double DualSimplex::dot_column(int var, const std::vector<double>& y) const {
  if (var >= n_) return -y[var - n_];
  double sum = 0.0;
  for (const auto& [row, val] : col_entries_[var]) sum += y[row] * val;
  return sum;
}

void DualSimplex::compute_primal() {
  std::vector<double> rhs(m_, 0.0);
  const int total = n_ + m_;
  for (int var = 0; var < total; ++var) {
    if (pos_[var] >= 0) continue;
    const double value = x_[var];
    if (value == 0.0) continue;
    if (var < n_) {
      for (const auto& [row, val] : col_entries_[var]) rhs[row] -= val * value;
    } else {
      rhs[var - n_] += value;
    }
  }
  ftran(rhs);
  for (int r = 0; r < m_; ++r) x_[head_[r]] = rhs[r];
  primal_dirty_ = false;
}

void DualSimplex::compute_duals() {
  std::vector<double> y(m_);
  for (int r = 0; r < m_; ++r) y[r] = cost_[head_[r]];
  btran(y);
  const int total = n_ + m_;
  for (int var = 0; var < total; ++var) {
    d_[var] = pos_[var] >= 0 ? 0.0 : cost_[var] - dot_column(var, y);
  }
}

// Moves nonbasic variables whose reduced cost has the wrong sign to the
// opposite bound, introducing an artificial bound where none exists.
// Returns true when any variable moved.
bool DualSimplex::repair_dual_infeasibility() {
  bool moved = false;
  const int total = n_ + m_;
  for (int var = 0; var < total; ++var) {
    if (pos_[var] >= 0) continue;
    const double dj = d_[var];
    const std::uint8_t s = status_[var];
    const bool wants_upper = dj < -opt_.dual_tol && s != kAtUpper;
    const bool wants_lower = dj > opt_.dual_tol && s != kAtLower;
    if (lo_[var] == hi_[var]) continue;
    if (wants_upper) {
      if (!std::isfinite(hi_[var])) {
        hi_[var] = std::max(x_[var], 0.0) + opt_.artificial_bound;
        artificial_hi_[var] = true;
      }
      status_[var] = kAtUpper;
      x_[var] = hi_[var];
      moved = true;
    } else if (wants_lower) {
      if (!std::isfinite(lo_[var])) {
        lo_[var] = std::min(x_[var], 0.0) - opt_.artificial_bound;
        artificial_lo_[var] = true;
      }
      status_[var] = kAtLower;
      x_[var] = lo_[var];
      moved = true;
    }
  }
  return moved;
}

bool DualSimplex::at_artificial_bound() const {
  const int total = n_ + m_;
  for (int var = 0; var < total; ++var) {
    if (pos_[var] >= 0) continue;
    if ((artificial_lo_[var] && status_[var] == kAtLower) ||
        (artificial_hi_[var] && status_[var] == kAtUpper)) {
      if (std::abs(d_[var]) > opt_.dual_tol) return true;
    }
  }
  return false;
}

// Reduced cost measured in the dual-feasible direction, clipped at zero.
double DualSimplex::signed_reduced_cost(int var) const {
  switch (status_[var]) {
    case kAtLower: return std::max(0.0, d_[var]);
    case kAtUpper: return std::max(0.0, -d_[var]);
    default: return 0.0;
  }
}

double DualSimplex::objective() const {
  double sum = 0.0;
  for (int j = 0; j < n_; ++j) sum += cost_[j] * x_[j];
  return sum;
}

LpStatus DualSimplex::solve() {
  if (head_.size() != static_cast<std::size_t>(m_)) install_slack_basis();
  bool recovered = false;
  for (int attempt = 0; attempt < 3; ++attempt) {
    if (!factor_valid_ && !refactor()) {
      install_slack_basis();
      if (!refactor()) return LpStatus::kNumericalFailure;
    }
    const LpStatus status = iterate();
    if (status != LpStatus::kNumericalFailure) return status;
    if (recovered) break;
    // Fall back to a cold start once.
    install_slack_basis();
    recovered = true;
  }
  return LpStatus::kNumericalFailure;
}

LpStatus DualSimplex::iterate() {
  const int total = n_ + m_;
  for (int var = 0; var < total; ++var) {
    if (pos_[var] < 0) x_[var] = bound_for_status(var);
  }
  compute_primal();
  compute_duals();
  if (repair_dual_infeasibility()) compute_primal();

  std::vector<double> rho(m_), alpha(total, 0.0), column(m_), tau(m_);
  std::vector<int> candidates, touched;
  long local_iterations = 0;
  int since_check = 0;

  while (true) {
    if (pivot_etas_ >= opt_.refactor_interval ||
        static_cast<int>(etas_.size()) >= 8 * opt_.refactor_interval) {
      if (!refactor()) return LpStatus::kNumericalFailure;
      compute_primal();
      compute_duals();
      if (repair_dual_infeasibility()) compute_primal();
    }

    // Leaving row: largest squared infeasibility over steepest-edge weight.
    int leave = -1;
    double best = 0.0;
    for (int r = 0; r < m_; ++r) {
      const int var = head_[r];
      double infeas = 0.0;
      if (x_[var] < lo_[var] - opt_.primal_tol) {
        infeas = lo_[var] - x_[var];
      } else if (x_[var] > hi_[var] + opt_.primal_tol) {
        infeas = x_[var] - hi_[var];
      }
      if (infeas > 0.0) {
        const double score = infeas * infeas / weight_[r];
        if (score > best) {
          best = score;
          leave = r;
        }
      }
    }

    if (leave < 0) {
      // Confirm with recomputed primal and dual values before declaring
      // optimality; a long eta file gets a fresh factorization first.
      if (!etas_.empty() || since_check > 0) {
        if (pivot_etas_ > 20 && !refactor()) return LpStatus::kNumericalFailure;
        compute_primal();
        compute_duals();
        since_check = 0;
        const bool moved = repair_dual_infeasibility();
        if (moved) compute_primal();
        bool primal_ok = true;
        for (int r = 0; r < m_ && primal_ok; ++r) {
          const int var = head_[r];
          primal_ok = x_[var] >= lo_[var] - opt_.primal_tol && x_[var] <= hi_[var] + opt_.primal_tol;
        }
        if (!primal_ok) continue;
      }
      if (at_artificial_bound()) return LpStatus::kUnbounded;
      return LpStatus::kOptimal;
    }

    if (local_iterations >= opt_.max_iterations) return LpStatus::kIterationLimit;
    ++local_iterations;
    ++total_iterations_;
    ++since_check;

    const int leave_var = head_[leave];
    const bool to_lower = x_[leave_var] < lo_[leave_var];
    const double target = to_lower ? lo_[leave_var] : hi_[leave_var];
    const double s = to_lower ? 1.0 : -1.0;

    std::fill(rho.begin(), rho.end(), 0.0);
    rho[leave] = 1.0;
    btran(rho);
    double rho_norm2 = 0.0;
    for (double v : rho) rho_norm2 += v * v;
    weight_[leave] = std::max(rho_norm2, 1e-12);

    // Pivot row alpha = rho' [A -I], accumulated over the nonzeros of rho.
    for (int var : touched) alpha[var] = 0.0;
    touched.clear();
    for (int i = 0; i < m_; ++i) {
      const double r = rho[i];
      if (std::abs(r) < 1e-13) continue;
      for (const auto& [j, a] : row_entries_[i]) {
        if (alpha[j] == 0.0) touched.push_back(j);
        alpha[j] += r * a;
        if (alpha[j] == 0.0) alpha[j] = 1e-300;
      }
      touched.push_back(n_ + i);
      alpha[n_ + i] = -r;
    }

    // Harris two-pass ratio test over the pivot row.
    double max_alpha = 0.0;
    candidates.clear();
    for (int var : touched) {
      if (pos_[var] >= 0 || lo_[var] == hi_[var]) continue;
      const double a = alpha[var];
      const double sa = s * a;
      if (std::abs(a) < opt_.pivot_tol) continue;
      const std::uint8_t st = status_[var];
      const bool eligible = (st == kAtLower && sa < 0.0) || (st == kAtUpper && sa > 0.0) ||
                            st == kFreeZero;
      if (!eligible) continue;
      candidates.push_back(var);
      max_alpha = std::max(max_alpha, std::abs(a));
    }
    if (candidates.empty()) {
      if (!etas_.empty() || since_check > 1) {
        // Recheck infeasibility on a fresh factorization.
        if (!refactor()) return LpStatus::kNumericalFailure;
        compute_primal();
        compute_duals();
        if (repair_dual_infeasibility()) compute_primal();
        since_check = 0;
        continue;
      }
      return LpStatus::kInfeasible;
    }
    const double rel_pivot = std::max(opt_.pivot_tol, 1e-7 * max_alpha);
    double theta_max = kInf;
    for (int var : candidates) {
      const double a = std::abs(alpha[var]);
      if (a < rel_pivot) continue;
      const double dj = signed_reduced_cost(var);
      const double slack = status_[var] == kFreeZero ? 0.0 : opt_.dual_tol;
      theta_max = std::min(theta_max, (dj + slack) / a);
    }
    int enter = -1;
    double enter_alpha = 0.0;
    for (int var : candidates) {
      const double a = std::abs(alpha[var]);
      if (a < rel_pivot) continue;
      const double dj = signed_reduced_cost(var);
      if (dj / a <= theta_max && a > enter_alpha) {
        enter_alpha = a;
        enter = var;
      }
    }
    if (enter < 0) {
      // Only tiny pivots remain; refactor and retry before giving up.
      if (!refactor()) return LpStatus::kNumericalFailure;
      compute_primal();
      compute_duals();
      if (repair_dual_infeasibility()) compute_primal();
      if (since_check <= 1) return LpStatus::kNumericalFailure;
      since_check = 0;
      continue;
    }

    column_of(enter, column);
    ftran(column);
    const double pivot = column[leave];
    const bool mismatch = std::abs(pivot - alpha[enter]) > 1e-6 * (1.0 + std::abs(pivot));
    if (std::abs(pivot) < 1e-11 || (mismatch && !etas_.empty())) {
      if (etas_.empty()) return LpStatus::kNumericalFailure;
      if (!refactor()) return LpStatus::kNumericalFailure;
      compute_primal();
      compute_duals();
      if (repair_dual_infeasibility()) compute_primal();
      continue;
    }

    // Dual update.
    const double theta_d = d_[enter] / pivot;
    for (int var : touched) {
      if (pos_[var] < 0) d_[var] -= theta_d * alpha[var];
    }
    d_[enter] = 0.0;
    d_[leave_var] = -theta_d;

    // Steepest-edge weights need tau = B^-1 rho before the basis changes.
    tau = rho;
    ftran(tau);
    const double beta_r = weight_[leave];
    for (int r = 0; r < m_; ++r) {
      if (r == leave || column[r] == 0.0) continue;
      const double ratio = column[r] / pivot;
      weight_[r] = std::max(weight_[r] - 2.0 * ratio * tau[r] + ratio * ratio * beta_r,
                            std::max(1e-8, ratio * ratio));
    }
    weight_[leave] = std::max(beta_r / (pivot * pivot), 1e-8);

    // Primal update.
    const double step = (x_[leave_var] - target) / pivot;
    for (int r = 0; r < m_; ++r) {
      if (column[r] != 0.0) x_[head_[r]] -= column[r] * step;
    }
    x_[enter] += step;
    x_[leave_var] = target;

    // Basis swap.
    head_[leave] = enter;
    pos_[enter] = leave;
    pos_[leave_var] = -1;
    status_[enter] = kBasic;
    status_[leave_var] = to_lower ? kAtLower : kAtUpper;
    if (lo_[leave_var] == hi_[leave_var]) status_[leave_var] = kAtLower;

    Eta eta;
    eta.row = leave;
    eta.pivot = pivot;
    for (int r = 0; r < m_; ++r) {
      if (r != leave && std::abs(column[r]) > 1e-14) eta.column.emplace_back(r, column[r]);
    }
    etas_.push_back(std::move(eta));
    ++pivot_etas_;
  }
}

}  // namespace gridshed
