#pragma once

#include "cnmpc/polyhedron.hpp"
#include "cnmpc/types.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cnmpc {

// ---------------------------------------------------------------------------
// Input-gain nonlinearities g_i. Each tag has closed-form value, gradient and
// Hessian.

/// c^T x + d
struct AffineAtom {
  Vec c;
  double d = 0.0;
};

/// x^T H x + c^T x + d, H symmetric
struct QuadraticAtom {
  Mat H;
  Vec c;
  double d = 0.0;
};

/// a cos(w^T x + phi)
struct SinusoidAtom {
  double a = 0.0;
  Vec w;
  double phi = 0.0;
};

using NonlinearityAtom = std::variant<AffineAtom, QuadraticAtom, SinusoidAtom>;

double atom_value(const NonlinearityAtom& atom, const Eigen::Ref<const Vec>& x);
Vec atom_gradient(const NonlinearityAtom& atom, const Eigen::Ref<const Vec>& x);
Mat atom_hessian(const NonlinearityAtom& atom, const Eigen::Ref<const Vec>& x);
bool is_affine(const NonlinearityAtom& atom);
const char* atom_kind(const NonlinearityAtom& atom);
Index atom_dim(const NonlinearityAtom& atom);

/// x(k+1) = A x + B G(x) u with G(x) = diag(g_1(x), ..., g_m(x)).
struct SystemModel {
  Mat A;
  Mat B;
  std::vector<NonlinearityAtom> g;

  Index n() const { return A.rows(); }
  Index m() const { return B.cols(); }

  /// Dimension and symmetry checks; throws Config on mismatch.
  void check() const;

  Vec next_state(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& u) const;
};

/// (g_1(x), ..., g_m(x))
Vec eval_g(const SystemModel& model, const Eigen::Ref<const Vec>& x);
/// Row i holds the gradient of g_i.
Mat eval_g_jacobian(const SystemModel& model, const Eigen::Ref<const Vec>& x);
/// Hessians of g_1..g_m.
std::vector<Mat> eval_g_hessians(const SystemModel& model, const Eigen::Ref<const Vec>& x);

struct InputBox {
  Vec lower;
  Vec upper;

  bool contains(const Eigen::Ref<const Vec>& u, double tol = 0.0) const {
    return ((u - upper).array() <= tol).all() && ((lower - u).array() <= tol).all();
  }
  bool origin_strictly_interior() const {
    return (lower.array() < 0.0).all() && (upper.array() > 0.0).all();
  }
};

/// Which branch of the sign/curvature dichotomy a g_i satisfies on a partition.
enum class SignCase { NonnegConcave, NonposConvex };
enum class Verdict { NonnegConcave, NonposConvex, Reject };

const char* to_string(SignCase c);
const char* to_string(Verdict v);
std::optional<SignCase> sign_case_from_string(const std::string& s);

struct CurvatureCertificate {
  Verdict verdict = Verdict::Reject;
  /// Sign condition alone (curvature ignored); empty when the sign is mixed.
  std::optional<SignCase> sign;
  bool curvature_ok = false;
  double lower = 0.0;  // range of g on the polyhedron
  double upper = 0.0;
  std::string reason;
};

struct CertifyOptions {
  double sign_tol = 1e-9;
  double eig_tol = 1e-10;
  double angle_tol = 1e-9;
};

/// Decides which sign/curvature branch holds for `atom` on the polyhedron.
/// With `declared` set, only that branch is tested. Throws InvalidPartition on
/// an empty or unbounded polyhedron.
CurvatureCertificate certify_curvature(const NonlinearityAtom& atom, const Polyhedron& P,
                                       std::optional<SignCase> declared = std::nullopt,
                                       const CertifyOptions& opts = {});

struct Partition {
  int index = 1;  // 1-based, as in X_1..X_s
  Polyhedron set;
  /// Declared per-channel case; empty entries are inferred during certification.
  std::vector<std::optional<SignCase>> declared;
  /// Filled by certification.
  std::vector<SignCase> sign_case;
  std::vector<bool> curvature_ok;

  bool certified() const { return !sign_case.empty(); }
};

/// strict: any curvature failure rejects the universe.
/// sign_only: a verified sign with failed curvature is a warning; the affected
/// generators are flagged nonconvex and solved locally.
enum class CurvaturePolicy { Strict, SignOnly };

struct ConstraintUniverse {
  std::vector<Partition> partitions;
  InputBox input_box;
  Polyhedron state_set;
  CurvaturePolicy policy = CurvaturePolicy::Strict;
  double grid_pitch_fraction = 0.05;

  Index s() const { return static_cast<Index>(partitions.size()); }
  bool certified() const;
  /// Index of the first partition containing x (1-based), 0 when none.
  int locate(const Eigen::Ref<const Vec>& x, double tol = 1e-9) const;
  bool in_union(const Eigen::Ref<const Vec>& x, double tol = 1e-9) const { return locate(x, tol) > 0; }
};

struct ValidationReport {
  bool pass = true;
  std::vector<std::string> failures;
  std::vector<std::string> warnings;
  /// certificates[j][i]: partition j, channel i.
  std::vector<std::vector<CurvatureCertificate>> certificates;
  std::string coverage_method;  // "grid" or "sampled"; heuristic either way
  std::size_t coverage_points = 0;
  std::size_t coverage_misses = 0;

  std::string to_text() const;
};

ValidationReport validate_universe(const SystemModel& model, const ConstraintUniverse& universe,
                                   const CertifyOptions& opts = {});

/// Validates and attaches the per-partition certificates. Throws
/// UncertifiedPartition (with the report text) when validation fails.
ConstraintUniverse certify_universe(const SystemModel& model, ConstraintUniverse universe,
                                    const CertifyOptions& opts = {});

struct ShiftReport {
  double residual = 0.0;
  bool input_in_box = true;
  bool state_in_set = true;
};

struct ShiftedProblem {
  SystemModel model;
  ConstraintUniverse universe;
  ShiftReport report;
};

/// Rewrites the system in coordinates dx = x - x_eq, du = u - u_eq. Only affine
/// gains are supported: A~ = A + sum_i b_i c_i^T u_eq_i and
/// g~_i(dx) = c_i^T (dx + x_eq) + d_i.
ShiftedProblem shift_to_equilibrium(const SystemModel& model, const ConstraintUniverse& universe,
                                    const Vec& x_eq, const Vec& u_eq, double residual_tol = 1e-9);

}  // namespace cnmpc
