#pragma once

#include "cnmpc/types.hpp"

#include <optional>
#include <vector>

namespace cnmpc {

/// H-representation {x : F x <= f}.
struct Polyhedron {
  Mat F;
  Vec f;

  Polyhedron() = default;
  Polyhedron(Mat F_, Vec f_);

  static Polyhedron box(const Vec& lower, const Vec& upper);

  Index dim() const { return F.cols(); }
  Index rows() const { return F.rows(); }

  /// max_i (F_i x - f_i); nonpositive iff x is inside.
  double max_violation(const Eigen::Ref<const Vec>& x) const;
  bool contains(const Eigen::Ref<const Vec>& x, double tol = 1e-9) const {
    return max_violation(x) <= tol;
  }

  /// Stacks the rows of both sets.
  Polyhedron intersect(const Polyhedron& other) const;

  /// {y : y + shift in *this}, i.e. the set expressed in coordinates y = x - shift.
  Polyhedron shifted(const Vec& shift) const;

  /// {x : M x in *this}.
  Polyhedron preimage(const Mat& M) const;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;
  Vec x;
};

/// max c^T x over P. Primal active-set method on the inequality form; starts
/// from `start` when given (must be feasible), otherwise from the Chebyshev
/// center.
LpResult lp_maximize(const Polyhedron& P, const Eigen::Ref<const Vec>& c,
                     const std::optional<Vec>& start = std::nullopt);
LpResult lp_minimize(const Polyhedron& P, const Eigen::Ref<const Vec>& c,
                     const std::optional<Vec>& start = std::nullopt);

struct ChebyshevBall {
  Vec center;
  double radius = 0.0;  // negative when P is empty
};

/// Largest inscribed ball, radius capped at `radius_cap` for unbounded sets.
ChebyshevBall chebyshev_center(const Polyhedron& P, double radius_cap = 1e6);

bool is_empty(const Polyhedron& P, double tol = 1e-9);
bool is_bounded(const Polyhedron& P);

/// Drops zero rows, duplicates and rows implied by the others.
Polyhedron remove_redundant(const Polyhedron& P, double tol = 1e-9);

/// Interval [min, max] of c^T x over a bounded nonempty P.
std::pair<double, double> range_of(const Polyhedron& P, const Eigen::Ref<const Vec>& c);

/// Vertices of a bounded polytope. In 2-D they come back in counter-clockwise
/// order; in higher dimension by enumeration of row subsets (throws
/// Unsupported past `max_combinations`).
std::vector<Vec> vertices(const Polyhedron& P, std::size_t max_combinations = 2'000'000);

/// P ⊆ Q, decided by one LP per row of Q.
bool is_subset(const Polyhedron& P, const Polyhedron& Q, double tol = 1e-9);

/// H-representation of the convex hull of planar points (counter-clockwise hull).
Polyhedron convex_hull_2d(const std::vector<Vec>& points);

}  // namespace cnmpc
