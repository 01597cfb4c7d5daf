#pragma once

#include "cnmpc/cost.hpp"
#include "cnmpc/polyhedron.hpp"
#include "cnmpc/transform.hpp"

#include <iosfwd>

namespace cnmpc {

/// P from P <- A^T (P - P B (R + B^T P B)^-1 B^T P) A + Q, started at P = Q.
/// Throws NoConvergence after max_iter sweeps.
Mat solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, double tol = 1e-12, int max_iter = 100000);

/// Infinity norm of the Riccati residual at P.
double dare_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P);

/// K = -(R + B^T P B)^-1 B^T P A, so that v = K x. Throws SingularInnerMatrix.
Mat lqr_gain(const Mat& A, const Mat& B, const Mat& P, const Mat& R);

struct TerminalOptions {
  int directions = 64;  // rays for the planar inner approximation
  int k_max = 200;
  double redundancy_tol = 1e-9;
  double zero_tol = 1e-9;
};

struct TerminalIngredients {
  Mat P;
  Mat K;
  Polyhedron T;
  int k_star = 0;
  int partition = 1;
  /// Polyhedral inner approximation of {x : (x, K x) in Z_j} that seeded T.
  Polyhedron section;
  bool section_exact = true;
};

/// Inner polyhedral approximation of {x : (x, K x) in Z}. Exact when every
/// generator is affine; otherwise planar only (throws Unsupported for n > 2).
Polyhedron section_inner_approximation(const MixedSetZj& Z, const Mat& K, const TerminalOptions& opts,
                                       bool* exact = nullptr);

/// Largest subset of `section` that is invariant under x -> A_cl x, by the
/// Gilbert-Tan row iteration. Throws NotFinitelyDetermined past k_max.
Polyhedron maximal_admissible_set(const Mat& A_cl, const Polyhedron& section, const TerminalOptions& opts,
                                  int* k_star = nullptr);

/// DARE, LQR gain and terminal set inside partition `partition`. Throws
/// InteriorityViolated unless the origin is interior to X_j and no gain
/// vanishes there.
TerminalIngredients build_terminal(const SystemModel& model, const ConstraintUniverse& universe,
                                   const QuadraticStageCost& cost, int partition = 1,
                                   const TerminalOptions& opts = {});

/// max over rows of H_T A_cl x - h_T on T; <= tol means invariant.
double invariance_violation(const Polyhedron& T, const Mat& A_cl);

/// Rows "H_T | h_T" as CSV with a header line.
void write_terminal_csv(std::ostream& os, const Polyhedron& T);

}  // namespace cnmpc
