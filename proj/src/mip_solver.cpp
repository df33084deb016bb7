#include "gridshed/mip_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <queue>

#include "gridshed/relaxation_cuts.hpp"

namespace gridshed {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kFeasibleAtLimit: return "feasible-at-limit";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kError: return "error";
  }
  return "unknown";
}

double relative_gap(double incumbent, double bound) {
  if (!std::isfinite(incumbent) || !std::isfinite(bound)) return kInf;
  const double diff = std::abs(bound - incumbent);
  if (diff <= 1e-12) return 0.0;
  return diff / std::max(std::abs(incumbent), 1e-9);
}

namespace {

std::pair<double, double> row_range(const LinearRow& row) {
  switch (row.sense) {
    case RowSense::kLessEqual: return {-kInf, row.rhs};
    case RowSense::kEqual: return {row.rhs, row.rhs};
    case RowSense::kGreaterEqual: return {row.rhs, kInf};
  }
  return {-kInf, kInf};
}

std::unique_ptr<DualSimplex> load_lp(const ConicMipInstance& instance, const LpOptions& options) {
  const int n = instance.num_columns();
  auto lp = std::make_unique<DualSimplex>(n, options);
  std::vector<double> cost(instance.objective);
  if (instance.sense == ObjectiveSense::kMaximize) {
    for (double& c : cost) c = -c;
  }
  lp->set_objective(cost);
  for (int j = 0; j < n; ++j) lp->set_col_bounds(j, instance.columns[j].lower, instance.columns[j].upper);
  for (const LinearRow& row : instance.rows) {
    const auto [lo, hi] = row_range(row);
    lp->add_row(row.terms, lo, hi);
  }
  return lp;
}

}  // namespace

OuterApproximationSolver::OuterApproximationSolver(OaOptions options) : options_(options) {}
OuterApproximationSolver::~OuterApproximationSolver() = default;

void OuterApproximationSolver::prepare(const ConicMipInstance& instance) {
  if (bound_ == &instance && bound_rows_ == instance.rows.size() &&
      bound_cones_ == instance.cones.size() && lp_) {
    return;
  }
  bound_ = &instance;
  bound_rows_ = instance.rows.size();
  bound_cones_ = instance.cones.size();
  lp_ = load_lp(instance, options_.lp);
  active_.clear();
  active_age_.clear();
  pool_size_ = 0;
}

void OuterApproximationSolver::add_cut(LinearRow cut) {
  const auto [lo, hi] = row_range(cut);
  lp_->add_row(cut.terms, lo, hi);
  active_.push_back(std::move(cut));
  active_age_.push_back(0);
}

NodeResult OuterApproximationSolver::loop(const ConicMipInstance& instance, int max_rounds) {
  NodeResult out;
  const double tol = options_.cone_tol;
  for (int round = 0;; ++round) {
    const LpStatus status = lp_->solve();
    switch (status) {
      case LpStatus::kOptimal: break;
      case LpStatus::kInfeasible: out.status = NodeStatus::kInfeasible; return out;
      case LpStatus::kUnbounded: out.status = NodeStatus::kUnbounded; return out;
      default:
        out.status = NodeStatus::kError;
        out.message = std::string("LP solve failed: ") + to_string(status);
        return out;
    }
    auto x = lp_->primal();
    out.x.assign(x.begin(), x.end());
    out.objective = instance.objective_value(out.x);
    out.basis = lp_->basis();

    std::vector<LinearRow> cuts;
    for (const RotatedCone& cone : instance.cones) {
      if (auto cut = lazy_cone_cut(out.x, cone, tol)) cuts.push_back(std::move(*cut));
    }
    if (cuts.empty()) {
      out.status = NodeStatus::kOptimal;
      return out;
    }
    if (round >= max_rounds) {
      out.status = NodeStatus::kBoundOnly;
      return out;
    }
    out.cuts_added += static_cast<long>(cuts.size());
    pool_size_ += static_cast<long>(cuts.size());
    for (LinearRow& cut : cuts) add_cut(std::move(cut));
  }
}

void OuterApproximationSolver::purge() {
  const int base = static_cast<int>(bound_rows_);
  for (std::size_t k = 0; k < active_.size(); ++k) {
    if (lp_->row_basic(base + static_cast<int>(k))) {
      ++active_age_[k];
    } else {
      active_age_[k] = 0;
    }
  }
  if (static_cast<int>(active_.size()) <= options_.active_cut_limit) return;
  // Old slack cuts go first; past twice the limit every basic cut does.
  // Dropping a row whose slack is basic leaves the current optimum in place.
  const bool all = static_cast<int>(active_.size()) > 2 * options_.active_cut_limit;
  std::vector<int> drop;
  for (std::size_t k = 0; k < active_.size(); ++k) {
    const int row = base + static_cast<int>(k);
    if (lp_->row_basic(row) && (all || active_age_[k] >= options_.cut_age_limit)) drop.push_back(row);
  }
  if (drop.empty()) return;
  lp_->remove_rows(drop);
  std::vector<LinearRow> still;
  std::vector<int> still_age;
  std::size_t d = 0;
  for (std::size_t k = 0; k < active_.size(); ++k) {
    if (d < drop.size() && drop[d] == base + static_cast<int>(k)) {
      ++d;
    } else {
      still.push_back(std::move(active_[k]));
      still_age.push_back(active_age_[k]);
    }
  }
  active_ = std::move(still);
  active_age_ = std::move(still_age);
}

NodeResult OuterApproximationSolver::solve(const ConicMipInstance& instance,
                                           const NodeRequest& request) {
  prepare(instance);
  const int n = instance.num_columns();
  for (int j = 0; j < n; ++j) {
    const double lo = request.lower.empty() ? instance.columns[j].lower : request.lower[j];
    const double hi = request.upper.empty() ? instance.columns[j].upper : request.upper[j];
    if (lo > hi) {
      NodeResult out;
      out.status = NodeStatus::kInfeasible;
      return out;
    }
    if (lo != lp_->col_lower(j) || hi != lp_->col_upper(j)) lp_->set_col_bounds(j, lo, hi);
  }
  if (request.warm != nullptr && !request.warm->empty()) lp_->set_basis(*request.warm);
  if (request.probe_iterations > 0) {
    NodeResult out;
    const long saved = lp_->iteration_limit();
    lp_->set_iteration_limit(request.probe_iterations);
    const LpStatus status = lp_->solve();
    lp_->set_iteration_limit(saved);
    if (status == LpStatus::kInfeasible) {
      out.status = NodeStatus::kInfeasible;
    } else if (status == LpStatus::kOptimal || status == LpStatus::kIterationLimit) {
      out.status = NodeStatus::kBoundOnly;
      auto x = lp_->primal();
      out.x.assign(x.begin(), x.end());
      out.objective = instance.objective_value(out.x);
    } else {
      out.status = NodeStatus::kError;
      out.message = std::string("probe failed: ") + to_string(status);
    }
    return out;
  }
  const int rounds = request.max_rounds > 0 ? request.max_rounds : options_.max_rounds;
  NodeResult out = loop(instance, rounds);
  if (out.status == NodeStatus::kError) {
    // One cold retry before reporting a failure.
    lp_->reset_basis();
    out = loop(instance, rounds);
  }
  if (out.status == NodeStatus::kOptimal || out.status == NodeStatus::kBoundOnly) purge();
  return out;
}

std::string validate(const BnbConfig& config) {
  if (!(config.time_limit_s > 0.0)) return "time limit must be positive";
  if (!(config.gap >= 0.0)) return "gap must be nonnegative";
  if (config.node_rounds < 0 || config.integral_rounds < 0) return "cut rounds must be nonnegative";
  if (config.reliability < 0 || config.probe_candidates < 0 || config.probe_iterations < 0) {
    return "branching parameters must be nonnegative";
  }
  if (!(config.feasibility_tol > 0.0) || !(config.integrality_tol > 0.0)) {
    return "tolerances must be positive";
  }
  if (!(config.integrality_tol < 0.5)) return "integrality tolerance must be below 0.5";
  return {};
}

SolveResult fix_and_resolve(const ConicMipInstance& instance, std::span<const double> assignment,
                            NodeRelaxationSolver& node_solver, int max_rounds) {
  const auto start = std::chrono::steady_clock::now();
  SolveResult result;
  const auto ints = instance.integer_columns();
  if (assignment.size() != ints.size()) {
    result.message = "assignment does not cover the integer columns";
    return result;
  }
  std::vector<double> lower, upper;
  for (const Column& c : instance.columns) {
    lower.push_back(c.lower);
    upper.push_back(c.upper);
  }
  for (std::size_t k = 0; k < ints.size(); ++k) {
    const int j = ints[k];
    const double v = assignment[k];
    if (v < lower[j] - 1e-9 || v > upper[j] + 1e-9) {
      result.status = SolveStatus::kInfeasible;
      result.message = "assignment outside column bounds";
      return result;
    }
    lower[j] = upper[j] = v;
  }
  node_solver.prepare(instance);
  NodeRequest request{lower, upper, nullptr, max_rounds};
  NodeResult node = node_solver.solve(instance, request);
  result.nodes = 1;
  result.cuts = node.cuts_added;
  switch (node.status) {
    case NodeStatus::kOptimal:
      result.status = SolveStatus::kOptimal;
      result.x = std::move(node.x);
      for (std::size_t k = 0; k < ints.size(); ++k) result.x[ints[k]] = assignment[k];
      result.objective = instance.objective_value(result.x);
      result.best_bound = result.objective;
      break;
    case NodeStatus::kInfeasible:
      result.status = SolveStatus::kInfeasible;
      break;
    case NodeStatus::kUnbounded:
      result.status = SolveStatus::kUnbounded;
      break;
    case NodeStatus::kBoundOnly:
      result.status = SolveStatus::kError;
      result.best_bound = node.objective;
      result.message = "cone tolerance not reached within the cut-round limit";
      break;
    case NodeStatus::kError:
      result.status = SolveStatus::kError;
      result.message = node.message;
      break;
  }
  result.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

namespace {

struct Node {
  long id = 0;
  int depth = 0;
  double bound = kInf;             // in maximization sense
  std::vector<double> lo, hi;      // per integer column
  std::shared_ptr<const LpBasis> basis;
  int branch_var = -1;             // index into the integer column list
  bool branch_up = false;
  double branch_frac = 0.0;        // distance moved by the branching bound
};

struct NodeOrder {
  bool operator()(const std::shared_ptr<Node>& a, const std::shared_ptr<Node>& b) const {
    if (a->bound != b->bound) return a->bound < b->bound;
    return a->id > b->id;
  }
};

class BranchAndBound {
 public:
  BranchAndBound(const ConicMipInstance& inst, const BnbConfig& cfg, NodeRelaxationSolver& solver)
      : inst_(inst),
        cfg_(cfg),
        solver_(solver),
        ints_(inst.integer_columns()),
        sign_(inst.sense == ObjectiveSense::kMaximize ? 1.0 : -1.0),
        start_(std::chrono::steady_clock::now()),
        pc_sum_(2, std::vector<double>(ints_.size(), 0.0)),
        pc_count_(2, std::vector<int>(ints_.size(), 0)) {}

  SolveResult run();

 private:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  bool out_of_time() const { return elapsed() >= cfg_.time_limit_s; }
  bool prunable(double bound) const {
    if (!has_incumbent_) return false;
    return bound <= incumbent_ || relative_gap(incumbent_, bound) <= cfg_.gap;
  }
  void note_pruned(double bound) {
    if (has_incumbent_ && bound > incumbent_) pruned_bound_ = std::max(pruned_bound_, bound);
  }
  double open_bound() const;
  double global_bound() const;
  void push(std::shared_ptr<Node> node);
  std::shared_ptr<Node> pop();
  bool empty() const { return heap_.empty() && stack_.empty(); }
  std::size_t open_count() const { return heap_.size() + stack_.size(); }

  std::vector<double> full_bounds(const std::vector<double>& ints_part, bool lower) const;
  int select_branch(const std::vector<double>& x) const;
  int choose_branch(const std::vector<double>& x, const std::vector<double>& lower,
                    const std::vector<double>& upper, double value);
  double pseudocost_estimate(int dir, std::size_t k) const;
  bool integral(const std::vector<double>& x) const { return select_branch(x) < 0; }
  void try_incumbent(std::vector<double> x);
  void try_assignment(const std::vector<double>& x, int mode);
  void record_pseudocost(const Node& node, double value);
  void log_progress(bool force);
  // Returns false when the run must stop with an error.
  bool process(const std::shared_ptr<Node>& node);

  const ConicMipInstance& inst_;
  const BnbConfig& cfg_;
  NodeRelaxationSolver& solver_;
  std::vector<int> ints_;
  double sign_;
  std::chrono::steady_clock::time_point start_;

  std::priority_queue<std::shared_ptr<Node>, std::vector<std::shared_ptr<Node>>, NodeOrder> heap_;
  std::vector<std::shared_ptr<Node>> stack_;
  std::shared_ptr<Node> plunge_;

  bool has_incumbent_ = false;
  double incumbent_ = -kInf;  // maximization sense
  std::vector<double> incumbent_x_;
  double pruned_bound_ = -kInf;
  double unresolved_bound_ = -kInf;
  double last_global_bound_ = kInf;
  long next_id_ = 0;
  long nodes_ = 0;
  long cuts_ = 0;
  double last_log_ = -1e300;
  bool root_unbounded_ = false;
  std::string error_;
  std::vector<std::vector<double>> pc_sum_;
  std::vector<std::vector<int>> pc_count_;
};

std::vector<double> BranchAndBound::full_bounds(const std::vector<double>& part, bool lower) const {
  std::vector<double> out(inst_.columns.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = lower ? inst_.columns[j].lower : inst_.columns[j].upper;
  }
  for (std::size_t k = 0; k < ints_.size(); ++k) out[ints_[k]] = part[k];
  return out;
}

double BranchAndBound::pseudocost_estimate(int dir, std::size_t k) const {
  if (pc_count_[dir][k] > 0) return pc_sum_[dir][k] / pc_count_[dir][k];
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < ints_.size(); ++i) {
    if (pc_count_[dir][i] > 0) {
      sum += pc_sum_[dir][i] / pc_count_[dir][i];
      ++count;
    }
  }
  return count > 0 ? sum / count : 1.0;
}

// Most fractional column, or the best pseudo-cost product; -1 when x is
// integral on every integer column.
int BranchAndBound::select_branch(const std::vector<double>& x) const {
  int best = -1;
  double best_score = -1.0;
  const bool pseudo = cfg_.branching != BranchingRule::kMostFractional;
  for (std::size_t k = 0; k < ints_.size(); ++k) {
    const double v = x[ints_[k]];
    const double f = v - std::floor(v);
    const double dist = std::min(f, 1.0 - f);
    if (dist <= cfg_.integrality_tol) continue;
    double score = dist;
    if (pseudo) {
      score = std::max(pseudocost_estimate(0, k) * f, 1e-6) *
              std::max(pseudocost_estimate(1, k) * (1.0 - f), 1e-6);
    }
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(k);
    }
  }
  return best;
}

int BranchAndBound::choose_branch(const std::vector<double>& x, const std::vector<double>& lower,
                                  const std::vector<double>& upper, double value) {
  if (cfg_.branching != BranchingRule::kReliability || cfg_.probe_candidates == 0 ||
      cfg_.probe_iterations == 0) {
    return select_branch(x);
  }
  struct Candidate {
    std::size_t k;
    double f, dist;
  };
  std::vector<Candidate> unreliable;
  int best = -1;
  double best_score = -1.0;
  for (std::size_t k = 0; k < ints_.size(); ++k) {
    const double v = x[ints_[k]];
    const double f = v - std::floor(v);
    const double dist = std::min(f, 1.0 - f);
    if (dist <= cfg_.integrality_tol) continue;
    if (std::min(pc_count_[0][k], pc_count_[1][k]) < cfg_.reliability) {
      unreliable.push_back({k, f, dist});
      continue;
    }
    const double score = std::max(pseudocost_estimate(0, k) * f, 1e-6) *
                         std::max(pseudocost_estimate(1, k) * (1.0 - f), 1e-6);
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(k);
    }
  }
  std::stable_sort(unreliable.begin(), unreliable.end(),
                   [](const Candidate& a, const Candidate& b) { return a.dist > b.dist; });
  if (static_cast<int>(unreliable.size()) > cfg_.probe_candidates) {
    unreliable.resize(cfg_.probe_candidates);
  }
  std::vector<double> lo = lower, hi = upper;
  for (const Candidate& c : unreliable) {
    const int j = ints_[c.k];
    const double v = x[j];
    double drop[2];
    for (int dir = 0; dir < 2; ++dir) {
      if (dir == 0) {
        hi[j] = std::floor(v);
      } else {
        lo[j] = std::ceil(v);
      }
      // The LP already sits at the node optimum; later probes start from
      // wherever the previous one stopped, which is still dual feasible.
      NodeRequest probe{lo, hi, nullptr, 0, cfg_.probe_iterations};
      const NodeResult r = solver_.solve(inst_, probe);
      lo[j] = lower[j];
      hi[j] = upper[j];
      const double moved = dir == 0 ? c.f : 1.0 - c.f;
      if (r.status == NodeStatus::kInfeasible) {
        drop[dir] = std::max(1.0, std::abs(value));
        continue;
      }
      if (r.status != NodeStatus::kBoundOnly) {
        drop[dir] = pseudocost_estimate(dir, c.k) * moved;
        continue;
      }
      drop[dir] = std::max(0.0, value - sign_ * r.objective);
      pc_sum_[dir][c.k] += drop[dir] / moved;
      pc_count_[dir][c.k] += 1;
    }
    const double score = std::max(drop[0], 1e-6) * std::max(drop[1], 1e-6);
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(c.k);
    }
  }
  return best;
}

double BranchAndBound::open_bound() const {
  double b = -kInf;
  if (!heap_.empty()) b = std::max(b, heap_.top()->bound);
  for (const auto& n : stack_) b = std::max(b, n->bound);
  if (plunge_) b = std::max(b, plunge_->bound);
  return b;
}

double BranchAndBound::global_bound() const {
  double b = std::max({open_bound(), pruned_bound_, unresolved_bound_, incumbent_});
  return std::min(b, last_global_bound_);
}

void BranchAndBound::push(std::shared_ptr<Node> node) {
  if (cfg_.node_selection == NodeSelection::kDepthFirst) {
    stack_.push_back(std::move(node));
  } else {
    heap_.push(std::move(node));
  }
}

std::shared_ptr<Node> BranchAndBound::pop() {
  if (plunge_) return std::exchange(plunge_, nullptr);
  if (!stack_.empty()) {
    auto n = stack_.back();
    stack_.pop_back();
    return n;
  }
  auto n = heap_.top();
  heap_.pop();
  return n;
}

void BranchAndBound::try_incumbent(std::vector<double> x) {
  for (int j : ints_) x[j] = std::round(x[j]);
  const ViolationReport report = check_point(inst_, x);
  if (!report.feasible(cfg_.feasibility_tol)) {
    std::vector<double> assignment;
    for (int j : ints_) assignment.push_back(x[j]);
    const SolveResult repaired = fix_and_resolve(inst_, assignment, solver_, cfg_.integral_rounds);
    cuts_ += repaired.cuts;
    if (repaired.status != SolveStatus::kOptimal) return;
    if (!check_point(inst_, repaired.x).feasible(cfg_.feasibility_tol)) return;
    x = repaired.x;
  }
  const double value = sign_ * inst_.objective_value(x);
  if (!has_incumbent_ || value > incumbent_) {
    has_incumbent_ = true;
    incumbent_ = value;
    incumbent_x_ = std::move(x);
  }
}

// Rounds the integer part of x (mode 0: nearest, 1: up, 2: down), solves the
// continuous remainder and keeps the point if it improves the incumbent.
void BranchAndBound::try_assignment(const std::vector<double>& x, int mode) {
  std::vector<double> assignment;
  for (int j : ints_) {
    const double v = mode == 0 ? std::round(x[j]) : mode == 1 ? std::ceil(x[j] - 1e-9) : std::floor(x[j] + 1e-9);
    assignment.push_back(std::clamp(v, inst_.columns[j].lower, inst_.columns[j].upper));
  }
  const SolveResult r = fix_and_resolve(inst_, assignment, solver_, cfg_.integral_rounds);
  cuts_ += r.cuts;
  if (r.status == SolveStatus::kOptimal) try_incumbent(r.x);
}

void BranchAndBound::record_pseudocost(const Node& node, double value) {
  if (node.branch_var < 0 || node.branch_frac <= 0.0 || !std::isfinite(node.bound)) return;
  const double degradation = std::max(0.0, node.bound - value) / node.branch_frac;
  const int dir = node.branch_up ? 1 : 0;
  pc_sum_[dir][node.branch_var] += degradation;
  pc_count_[dir][node.branch_var] += 1;
}

void BranchAndBound::log_progress(bool force) {
  if (cfg_.log == nullptr) return;
  const double t = elapsed();
  if (!force && t - last_log_ < cfg_.log_interval_s) return;
  last_log_ = t;
  const double bound = global_bound();
  *cfg_.log << "node " << nodes_ << " open " << open_count() << " bound " << sign_ * bound
            << " incumbent " << (has_incumbent_ ? sign_ * incumbent_ : std::nan(""))
            << " gap " << relative_gap(incumbent_, bound) << " cuts " << cuts_ << " time " << t
            << '\n';
}

bool BranchAndBound::process(const std::shared_ptr<Node>& node) {
  const auto lower = full_bounds(node->lo, true);
  const auto upper = full_bounds(node->hi, false);
  const bool native = solver_.handles_cones();
  int rounds = cfg_.node_rounds;
  std::shared_ptr<const LpBasis> warm = node->basis;
  bool repaired = false;

  while (true) {
    NodeRequest request{lower, upper, warm.get(), native ? 0 : std::max(rounds, 1)};
    NodeResult res = solver_.solve(inst_, request);
    cuts_ += res.cuts_added;
    switch (res.status) {
      case NodeStatus::kInfeasible: return true;
      case NodeStatus::kUnbounded:
        if (node->depth == 0) {
          root_unbounded_ = true;
          return true;
        }
        error_ = "unbounded relaxation below the root";
        return false;
      case NodeStatus::kError:
        error_ = "node solver failure: " + res.message;
        return false;
      default: break;
    }
    const double value = std::min(node->bound, sign_ * res.objective);
    record_pseudocost(*node, sign_ * res.objective);
    if (prunable(value)) {
      note_pruned(value);
      return true;
    }

    if (node->depth == 0 && !repaired && !ints_.empty()) {
      // Root rounding heuristics seed the incumbent.
      for (int mode = 0; mode < 3; ++mode) try_assignment(res.x, mode);
      if (prunable(value)) {
        note_pruned(value);
        return true;
      }
    }

    const int k = integral(res.x) ? -1 : choose_branch(res.x, lower, upper, value);
    if (k >= 0) {
      auto basis = std::make_shared<const LpBasis>(std::move(res.basis));
      const double v = res.x[ints_[k]];
      const double down_hi = std::floor(v), up_lo = std::ceil(v);
      auto child = [&](bool up) {
        auto c = std::make_shared<Node>();
        c->id = next_id_++;
        c->depth = node->depth + 1;
        c->bound = value;
        c->lo = node->lo;
        c->hi = node->hi;
        if (up) {
          c->lo[k] = up_lo;
        } else {
          c->hi[k] = down_hi;
        }
        c->basis = basis;
        c->branch_var = k;
        c->branch_up = up;
        c->branch_frac = up ? up_lo - v : v - down_hi;
        return c;
      };
      const bool prefer_up = v - down_hi >= 0.5;
      auto first = child(prefer_up);
      auto second = child(!prefer_up);
      if (cfg_.node_selection == NodeSelection::kHybrid) {
        push(std::move(second));
        plunge_ = std::move(first);
      } else {
        // Depth-first pops the preferred child first.
        push(std::move(second));
        push(std::move(first));
      }
      return true;
    }

    if (res.status == NodeStatus::kOptimal) {
      try_incumbent(std::move(res.x));
      return true;
    }

    // Integral LP point that still violates a cone.
    if (!repaired) {
      std::vector<double> assignment;
      for (int j : ints_) assignment.push_back(std::round(res.x[j]));
      const SolveResult fixed = fix_and_resolve(inst_, assignment, solver_, cfg_.integral_rounds);
      cuts_ += fixed.cuts;
      if (fixed.status == SolveStatus::kOptimal) try_incumbent(fixed.x);
      repaired = true;
      rounds = cfg_.integral_rounds;
      warm = std::make_shared<const LpBasis>(std::move(res.basis));
      continue;
    }
    unresolved_bound_ = std::max(unresolved_bound_, value);
    return true;
  }
}

SolveResult BranchAndBound::run() {
  SolveResult result;
  if (const std::string problem = validate(cfg_); !problem.empty()) {
    result.message = problem;
    return result;
  }
  if (const auto problems = validate(inst_); !problems.empty()) {
    result.message = "invalid instance: " + problems.front();
    return result;
  }
  solver_.prepare(inst_);

  auto root = std::make_shared<Node>();
  root->id = next_id_++;
  for (int j : ints_) {
    root->lo.push_back(std::ceil(inst_.columns[j].lower - 1e-9));
    root->hi.push_back(std::floor(inst_.columns[j].upper + 1e-9));
  }
  push(root);

  bool hit_limit = false;
  while (!empty()) {
    if (out_of_time() || (cfg_.node_limit >= 0 && nodes_ >= cfg_.node_limit)) {
      hit_limit = true;
      break;
    }
    auto node = pop();
    if (prunable(node->bound)) {
      note_pruned(node->bound);
      continue;
    }
    ++nodes_;
    if (!process(node)) {
      result.status = SolveStatus::kError;
      result.message = error_;
      break;
    }
    if (root_unbounded_) break;
    last_global_bound_ = global_bound();
    log_progress(false);
    if (has_incumbent_ && !plunge_ && relative_gap(incumbent_, open_bound()) <= cfg_.gap &&
        unresolved_bound_ <= incumbent_) {
      note_pruned(open_bound());
      heap_ = {};
      stack_.clear();
    }
  }
  log_progress(true);

  result.nodes = nodes_;
  result.cuts = cuts_;
  result.time_s = elapsed();
  if (!error_.empty()) return result;
  if (root_unbounded_) {
    result.status = SolveStatus::kUnbounded;
    return result;
  }

  const double bound = hit_limit ? global_bound() : std::max({pruned_bound_, unresolved_bound_, incumbent_});
  if (has_incumbent_) {
    result.x = incumbent_x_;
    result.objective = sign_ * incumbent_;
    result.best_bound = sign_ * std::max(bound, incumbent_);
    result.gap = relative_gap(incumbent_, std::max(bound, incumbent_));
    result.status = result.gap <= cfg_.gap ? SolveStatus::kOptimal : SolveStatus::kFeasibleAtLimit;
    if (result.status == SolveStatus::kFeasibleAtLimit && !hit_limit) {
      result.message = "cone tolerance not reached at some integral nodes";
    }
    return result;
  }
  if (hit_limit) {
    result.status = SolveStatus::kError;
    result.best_bound = sign_ * bound;
    result.gap = kInf;
    result.message = "limit reached without an incumbent";
    return result;
  }
  if (unresolved_bound_ > -kInf) {
    result.status = SolveStatus::kError;
    result.best_bound = sign_ * unresolved_bound_;
    result.message = "no incumbent; cone tolerance not reached at some integral nodes";
    return result;
  }
  result.status = SolveStatus::kInfeasible;
  return result;
}

}  // namespace

SolveResult solve(const ConicMipInstance& instance, const BnbConfig& config,
                  NodeRelaxationSolver& node_solver) {
  BranchAndBound bnb(instance, config, node_solver);
  return bnb.run();
}

SolveResult solve(const ConicMipInstance& instance, const BnbConfig& config) {
  OuterApproximationSolver node_solver;
  return solve(instance, config, node_solver);
}

}  // namespace gridshed
