#pragma once

#include "cnmpc/model.hpp"
#include "cnmpc/solver.hpp"

#include <memory>
#include <string>
#include <vector>

namespace cnmpc {

/// S: channels whose gain vanishes at x, N: the rest.
struct IndexSplit {
  std::vector<Index> S;
  std::vector<Index> N;
  double zero_tol = 1e-9;
};

IndexSplit split_indices(const SystemModel& model, const Eigen::Ref<const Vec>& x, double zero_tol = 1e-9);

/// alpha * g_i(x) + beta * v_i <= 0, a function of (x, v_i).
struct ZGenerator {
  Index channel = 0;
  double alpha = 0.0;
  double beta = 0.0;
  NonlinearityAtom atom;
  /// Convexity certified on the partition. False only under the sign-only policy.
  bool convex = true;

  bool affine() const { return is_affine(atom); }
  double value(const Eigen::Ref<const Vec>& x, double v) const { return alpha * atom_value(atom, x) + beta * v; }
  /// Gradient in the stacked variable (x, v_i).
  Vec gradient(const Eigen::Ref<const Vec>& x) const;
  Mat hessian(const Eigen::Ref<const Vec>& x) const;
  /// Linear row (a, b) with a^T x + b v_i <= r for affine atoms.
  void linear_row(Vec& a, double& b, double& r) const;
  std::string describe() const;
};

/// Solver handle over the stacked variable (x, v_i).
std::shared_ptr<const ConstraintFunction> make_constraint(const ZGenerator& gen);

/// Z_j: x in X_j together with two generators per input channel.
struct MixedSetZj {
  int partition = 1;
  Polyhedron state_set;
  std::vector<ZGenerator> generators;  // 2m, channel-major
  Index n = 0;
  Index m = 0;

  bool polyhedral() const;
  /// max of all state rows and generator values at (x, v).
  double max_violation(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& v) const;
  bool contains(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& v, double tol = 1e-9) const {
    return max_violation(x, v) <= tol;
  }
  /// Human-readable generator list, one per line.
  std::string dump() const;
};

/// Builds Z_j for the 1-based partition index j. Throws UncertifiedPartition
/// when the partition has no certificate.
MixedSetZj build_zj(const ConstraintUniverse& universe, const SystemModel& model, int j);
std::vector<MixedSetZj> build_all_zj(const ConstraintUniverse& universe, const SystemModel& model);

/// v = G(x) u
Vec forward_input(const SystemModel& model, const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& u);

struct RecoverOptions {
  double zero_tol = 1e-9;
  /// Largest |v_i| accepted on a vanishing channel.
  double consistency_tol = 1e-7;
  /// Box violations up to this size are clipped as noise.
  double clip_tol = 1e-7;
};

/// u_i = v_i / g_i(x) on non-vanishing channels, u_i = 0 otherwise.
Vec recover_input(const SystemModel& model, const InputBox& box, const Eigen::Ref<const Vec>& x,
                  const Eigen::Ref<const Vec>& v, const RecoverOptions& opts = {});

}  // namespace cnmpc
