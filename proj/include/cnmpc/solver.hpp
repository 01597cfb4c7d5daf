#pragma once

#include "cnmpc/types.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cnmpc {

/// Smooth scalar function of a few decision variables, used as f(z_S) <= 0.
class ConstraintFunction {
 public:
  virtual ~ConstraintFunction() = default;
  virtual double value(const Eigen::Ref<const Vec>& z) const = 0;
  virtual Vec gradient(const Eigen::Ref<const Vec>& z) const = 0;
  virtual Mat hessian(const Eigen::Ref<const Vec>& z) const = 0;
  /// False when convexity could not be certified; the solver then uses the
  /// PSD part of the Hessian and the result is only locally optimal.
  virtual bool convex() const { return true; }
};

struct ConvexConstraint {
  std::vector<Index> vars;  // positions in the decision vector
  std::shared_ptr<const ConstraintFunction> fn;
  std::string label;
};

/// min 1/2 z^T H z + q^T z + constant
/// s.t. E z = e, G z <= h, f_j(z_{S_j}) <= 0.
struct ConvexProgram {
  Mat H;
  Vec q;
  double constant = 0.0;
  Mat E;
  Vec e;
  Mat G;
  Vec h;
  std::vector<ConvexConstraint> nonlinear;
  std::optional<Vec> warm_start;

  /// Optional explicit description of {z : E z = e} as z = z0 + Z w. When
  /// absent the solver computes an orthonormal null-space basis by QR.
  struct Parametrization {
    Vec z0;
    Mat Z;
  };
  std::optional<Parametrization> parametrization;

  Index dim() const { return H.rows(); }
  Index num_inequalities() const { return G.rows() + static_cast<Index>(nonlinear.size()); }
  bool is_qp() const { return nonlinear.empty(); }

  double objective(const Eigen::Ref<const Vec>& z) const { return 0.5 * z.dot(H * z) + q.dot(z) + constant; }
  /// max over all inequalities of f_i(z); -inf without inequalities.
  double max_inequality(const Eigen::Ref<const Vec>& z) const;

  /// Shape checks and the PSD test on H (eigmin >= -1e-10). Throws Config.
  void check() const;
  void check_shapes() const;
};

enum class SolveStatus { Optimal, Infeasible, MaxIter, NumericalFailure };
const char* to_string(SolveStatus s);

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;  // mean s_i * lambda_i
};

struct SolveOutcome {
  SolveStatus status = SolveStatus::NumericalFailure;
  double value = 0.0;
  Vec z;
  Vec lambda_linear;     // multipliers of G z <= h
  Vec lambda_nonlinear;  // multipliers of f_j <= 0
  KktResiduals kkt;
  int iterations = 0;
};

struct SolverOptions {
  double stationarity_tol = 1e-9;
  double primal_tol = 1e-9;
  double mu_tol = 1e-11;
  /// Stationarity accepted once complementarity is below mu_tol and the
  /// iteration stops improving.
  double accept_tol = 1e-7;
  int max_iter = 200;
  double infeasibility_threshold = 1e-7;
  /// Optional per-iteration trace, one line each.
  std::ostream* trace = nullptr;
};

struct PhaseOneResult {
  bool feasible = false;
  Vec z;
  double t_star = 0.0;  // max_i f_i(z) at the returned point
  bool strictly_interior = false;
  int iterations = 0;
};

/// min t s.t. f_i(z) <= t (and t >= -1), E z = e. Stops as soon as an iterate
/// is strictly feasible; otherwise reports infeasible iff t* > threshold.
PhaseOneResult phase_one(const ConvexProgram& program, const SolverOptions& opts = {});

/// Feasible primal-dual barrier method started from the phase-one point.
SolveOutcome solve(const ConvexProgram& program, const SolverOptions& opts = {});

}  // namespace cnmpc
