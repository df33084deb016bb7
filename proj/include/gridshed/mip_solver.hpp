#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gridshed/conic_instance.hpp"
#include "gridshed/lp_solver.hpp"

namespace gridshed {

enum class SolveStatus { kOptimal, kFeasibleAtLimit, kInfeasible, kUnbounded, kError };

const char* to_string(SolveStatus status);

struct SolveResult {
  SolveStatus status = SolveStatus::kError;
  std::vector<double> x;  // incumbent, empty when none
  double objective = 0.0;
  double best_bound = 0.0;
  double gap = 0.0;  // relative, see relative_gap()
  long nodes = 0;
  long cuts = 0;
  double time_s = 0.0;
  std::string message;

  bool has_solution() const { return !x.empty(); }
};

/// |bound - incumbent| / max(|incumbent|, 1e-9); zero when the two agree.
double relative_gap(double incumbent, double bound);

// ---------------------------------------------------------------------------
// Node relaxation contract.

enum class NodeStatus {
  kOptimal,     // point satisfies rows and cones; objective is the relaxation optimum
  kBoundOnly,   // objective is a valid bound but the point is not cone-feasible
  kInfeasible,
  kUnbounded,
  kError,
};

/// One continuous relaxation: the instance with its column bounds replaced
/// by `lower` / `upper`. `warm` is an optional basis hint from a parent node.
struct NodeRequest {
  std::span<const double> lower;
  std::span<const double> upper;
  const LpBasis* warm = nullptr;
  int max_rounds = 0;  // 0: solver default
  // Positive: a quick look-ahead. One relaxation pass capped at this many
  // pivots and no cone separation; the objective is an estimate for
  // branching decisions, reported as kBoundOnly.
  long probe_iterations = 0;
};

/// Objective in the instance's own sense. For a maximization instance a
/// kOptimal or kBoundOnly objective is an upper bound on every integer point
/// inside the request bounds.
struct NodeResult {
  NodeStatus status = NodeStatus::kError;
  std::vector<double> x;
  double objective = 0.0;
  LpBasis basis;
  long cuts_added = 0;
  std::string message;
};

class NodeRelaxationSolver {
 public:
  virtual ~NodeRelaxationSolver() = default;
  /// True when the solver enforces cones itself; false for LP engines whose
  /// cone handling is by cuts.
  virtual bool handles_cones() const = 0;
  /// Called once per instance before any solve; may cache state keyed on it.
  virtual void prepare(const ConicMipInstance& instance) { (void)instance; }
  virtual NodeResult solve(const ConicMipInstance& instance, const NodeRequest& request) = 0;
};

struct OaOptions {
  double cone_tol = 1e-8;   // accepted cone violation, ||lhs|| - sqrt(a b)
  int max_rounds = 400;     // rounds before returning kBoundOnly
  // Once more cuts than this sit in the LP, ones that stayed slack through
  // `cut_age_limit` node solves are dropped.
  int active_cut_limit = 400;
  int cut_age_limit = 5;
  LpOptions lp;
};

/// LP engine plus lazy cone cuts. Cuts stay in one LP shared by every node
/// of the prepared instance: each cut is valid for the whole cone, so
/// children inherit what their ancestors separated. Cuts that stay slack for
/// a while are dropped once the LP holds too many.
class OuterApproximationSolver : public NodeRelaxationSolver {
 public:
  explicit OuterApproximationSolver(OaOptions options = {});
  ~OuterApproximationSolver() override;

  bool handles_cones() const override { return false; }
  void prepare(const ConicMipInstance& instance) override;
  NodeResult solve(const ConicMipInstance& instance, const NodeRequest& request) override;

  /// Cuts separated so far, including dropped ones.
  long pool_size() const { return pool_size_; }
  std::size_t active_cuts() const { return active_.size(); }
  const OaOptions& options() const { return options_; }

 private:
  // Separates cone violations at the LP optimum and re-solves until the
  // point is cone-feasible or `max_rounds` is reached.
  NodeResult loop(const ConicMipInstance& instance, int max_rounds);
  void add_cut(LinearRow cut);
  void purge();

  OaOptions options_;
  const ConicMipInstance* bound_ = nullptr;
  std::size_t bound_rows_ = 0;
  std::size_t bound_cones_ = 0;
  std::unique_ptr<DualSimplex> lp_;
  std::vector<LinearRow> active_;    // LP rows past the instance rows, in order
  std::vector<int> active_age_;      // node solves since the cut was last binding
  long pool_size_ = 0;
};

// ---------------------------------------------------------------------------
// Branch and bound.

enum class NodeSelection { kBestBound, kDepthFirst, kHybrid };
enum class BranchingRule {
  kMostFractional,
  kPseudoCost,
  // Pseudo-costs, with strong-branching probes for columns that have fewer
  // than `reliability` observations in a direction.
  kReliability,
};

struct BnbConfig {
  double time_limit_s = 300.0;
  double gap = 1e-4;
  NodeSelection node_selection = NodeSelection::kHybrid;
  BranchingRule branching = BranchingRule::kReliability;
  int reliability = 4;
  int probe_candidates = 8;      // probed columns per node, most fractional first
  long probe_iterations = 80;
  int node_rounds = 2;           // cut rounds at a node whose LP point is fractional
  int integral_rounds = 400;     // cut rounds once the LP point is integral
  double feasibility_tol = 1e-6;
  double integrality_tol = 1e-6;
  long node_limit = -1;          // negative: unlimited
  std::ostream* log = nullptr;   // progress lines, one per log interval
  double log_interval_s = 5.0;
};

/// Returns kError with a message when the configuration is out of range.
std::string validate(const BnbConfig& config);

SolveResult solve(const ConicMipInstance& instance, const BnbConfig& config,
                  NodeRelaxationSolver& node_solver);

/// Convenience overload using a fresh OuterApproximationSolver.
SolveResult solve(const ConicMipInstance& instance, const BnbConfig& config = {});

/// Continuous solve with every integer column fixed to `assignment`
/// (one value per entry of instance.integer_columns()).
SolveResult fix_and_resolve(const ConicMipInstance& instance, std::span<const double> assignment,
                            NodeRelaxationSolver& node_solver, int max_rounds = 0);

}  // namespace gridshed
