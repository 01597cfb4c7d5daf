#pragma once

#include "cnmpc/cost.hpp"
#include "cnmpc/model.hpp"
#include "cnmpc/solver.hpp"
#include "cnmpc/terminal.hpp"
#include "cnmpc/transform.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cnmpc {

using ScenarioIndex = std::uint64_t;

/// mu = 1 + sum_k (eps_k - 1) s^k with eps_k in 1..s. Throws OutOfRange.
ScenarioIndex encode(const std::vector<int>& eps, int s);
std::vector<int> decode(ScenarioIndex mu, int N, int s);
/// s^N, throwing OutOfRange on overflow.
ScenarioIndex scenario_count(int N, int s);

/// Everything the scenario subproblems share.
struct ScenarioSetup {
  SystemModel model;
  ConstraintUniverse universe;
  QuadraticStageCost cost;
  TerminalIngredients terminal;
  int horizon = 1;
  std::vector<MixedSetZj> zsets;
  /// Box containing v on every Z_j; used to relax the unassigned tail of a prefix.
  Vec v_lower;
  Vec v_upper;
  SolverOptions solver;

  int s() const { return static_cast<int>(zsets.size()); }
};

ScenarioSetup make_setup(SystemModel model, ConstraintUniverse universe, QuadraticStageCost cost,
                         TerminalIngredients terminal, int horizon, SolverOptions solver = {});

enum class EndConstraint { Terminal, None };

/// Subproblem for the partition sequence `eps` (length L <= N). Decision
/// vector: x(0..N) then v(0..N-1). Steps k < L use Z_{eps_k}. Steps L..N-1
/// use the relaxation x in X, v in [v_lower, v_upper] when `relax_tail`,
/// otherwise only x(L) in X. The end constraint x(N) in T applies when `end`
/// is Terminal and either L = N or the tail is relaxed. Without x0 the initial
/// state is free. With x0, channels whose gain vanishes at x0 have v0_i fixed
/// to zero through the parametrization.
ConvexProgram assemble_prefix(const ScenarioSetup& setup, const std::vector<int>& eps, const std::optional<Vec>& x0,
                              EndConstraint end = EndConstraint::Terminal, bool relax_tail = true);

/// Full-horizon subproblem V^(mu).
ConvexProgram assemble(const ScenarioSetup& setup, ScenarioIndex mu, const std::optional<Vec>& x0);

struct PruneStats {
  std::uint64_t nodes_visited = 0;  // phase-one problems solved
  std::uint64_t leaves_checked = 0;
  std::uint64_t eliminated = 0;  // scenarios removed, including pruned subtrees
  std::uint64_t restarts = 0;    // extra phase-one starts on non-convex prefixes
  std::uint64_t recovered = 0;   // prefixes a restart found feasible
  std::vector<std::uint64_t> feasible_prefixes;  // per depth 1..N
  double seconds = 0.0;
};

struct PrunedTree {
  int horizon = 0;
  int s = 0;
  std::vector<ScenarioIndex> feasible;  // with the terminal set, ascending
  PruneStats stats;
  /// Same search without the terminal set; empty when not requested.
  std::optional<std::vector<ScenarioIndex>> feasible_without_terminal;
  PruneStats stats_without_terminal;
  std::string config_hash;
};

struct PruneOptions {
  bool relax_tail = true;
  bool count_without_terminal = true;
  /// Before an infeasible verdict on a prefix with uncertified constraints,
  /// phase one is restarted from the parent's witness and from this many
  /// seeded random trajectories. Zero keeps the single local solve.
  int restarts = 8;
  std::uint64_t restart_seed = 20240601;
  std::ostream* progress = nullptr;
};

/// Depth-first search over partition sequences in ascending order; a prefix
/// whose phase-one problem is infeasible removes its whole subtree.
PrunedTree prune(const ScenarioSetup& setup, const PruneOptions& opts = {});

void save_tree(std::ostream& os, const PrunedTree& tree);
PrunedTree load_tree(std::istream& is);

struct ScenarioValue {
  ScenarioIndex mu = 0;
  SolveStatus status = SolveStatus::Infeasible;
  double value = 0.0;
};

struct SolveResult {
  SolveStatus status = SolveStatus::Infeasible;
  double value = 0.0;
  ScenarioIndex mu_star = 0;
  Vec u0;
  Vec v0;
  Mat x_pred;  // n x (N+1)
  Mat v_pred;  // m x N
  double min_slack = 0.0;  // of the winning subproblem's inequalities
  /// Full-horizon subproblems that were solved, in search order.
  std::vector<ScenarioValue> scenarios;
  std::uint64_t bound_solves = 0;  // relaxed prefix problems
  std::uint64_t pruned = 0;        // feasible scenarios never solved
};

enum class Search {
  /// Prefix problems with a relaxed tail bound the value of their subtree;
  /// a subtree is skipped when its bound exceeds the incumbent by more than
  /// the tie band. Only prefixes with certified convex constraints are used
  /// as bounds.
  BranchAndBound,
  /// Every scenario of the tree is solved.
  Exhaustive
};

/// Best feasible scenario at x: the smallest mu among values within `tie_tol`
/// relative of the minimum. Both searches return the same scenario. Throws
/// StateOutsideX.
SolveResult solve_state(const ScenarioSetup& setup, const PrunedTree& tree, const Vec& x, int jobs = 1,
                        double tie_tol = 1e-9, Search search = Search::BranchAndBound);

}  // namespace cnmpc
