#pragma once

#include "cnmpc/scenario.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cnmpc {

struct SimulationOptions {
  int steps = 60;
  double stop_tol = 1e-6;
  /// Wall-clock limit for one controller evaluation; 0 disables it.
  double step_budget_seconds = 0.0;
};

/// One closed-loop sample: the controller evaluated at x(k) and the input it
/// applied. The last record of a run holds the input that would be applied
/// next.
struct StepRecord {
  int k = 0;
  Vec x;
  Vec u;
  Vec v;
  double V = 0.0;
  ScenarioIndex mu_star = 0;
  /// min over the state and input constraints of (x(k), u(k)); negative when violated.
  double min_slack = 0.0;
  /// Smallest inequality slack of the winning subproblem.
  double solver_slack = 0.0;
};

enum class StopReason { Steps, Converged, Infeasible, Numerical, Budget };
const char* to_string(StopReason r);

struct Trajectory {
  std::vector<StepRecord> records;
  StopReason reason = StopReason::Steps;
  std::string message;
  /// x(k) after the last record when the run ended without a controller
  /// evaluation there (infeasible or over budget); empty otherwise.
  Vec unresolved_state;
};

class ClosedLoop {
 public:
  ClosedLoop(const ScenarioSetup& setup, const PrunedTree& tree, int jobs = 1);

  /// Evaluates the controller at x. Throws Error(StateOutsideX) when x is
  /// outside X and returns a result with a non-optimal status otherwise.
  SolveResult evaluate(const Vec& x) const;

  /// Record for x at step k, or nothing when the controller has no feasible
  /// scenario. Throws NumericalFailure when every scenario failed numerically.
  std::optional<StepRecord> step(const Vec& x, int k) const;

  /// Iterates until `steps` inputs were applied, the state is within
  /// stop_tol of the origin, or the controller fails.
  Trajectory run(const Vec& x0, const SimulationOptions& opts) const;

  const ScenarioSetup& setup() const { return setup_; }

 private:
  const ScenarioSetup& setup_;
  const PrunedTree& tree_;
  int jobs_;
};

/// Draws x uniformly from X (rejection inside its bounding box) and halves it
/// toward the origin until the controller is feasible there. Throws
/// NumericalFailure when no feasible point is found.
Vec sample_feasible_state(const ClosedLoop& loop, std::uint64_t seed, int max_halvings = 60);

/// Columns k, x_1..x_n, u_1..u_m, v_1..v_m, V, mu_star, min_slack. Offsets
/// are added to x and u (to report original coordinates of a shifted model).
void write_trajectory_csv(std::ostream& os, const Trajectory& t, const Vec& x_offset = Vec(),
                          const Vec& u_offset = Vec());

}  // namespace cnmpc
