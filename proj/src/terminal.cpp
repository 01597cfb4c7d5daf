#include "cnmpc/terminal.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

namespace cnmpc {

namespace {

Mat riccati_map(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P) {
  const Mat S = R + B.transpose() * P * B;
  const Mat PB = P * B;
  Mat next = A.transpose() * (P - PB * S.ldlt().solve(PB.transpose())) * A + Q;
  return 0.5 * (next + next.transpose());
}

}  // namespace

Mat solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, double tol, int max_iter) {
  if (A.rows() != A.cols() || B.rows() != A.rows() || Q.rows() != A.rows() || R.rows() != B.cols()) {
    throw Error(ErrorCode::Config, "solve_dare: dimension mismatch");
  }
  Mat P = Q;
  for (int it = 0; it < max_iter; ++it) {
    Mat next = riccati_map(A, B, Q, R, P);
    if (!next.allFinite()) break;
    const double step = (next - P).lpNorm<Eigen::Infinity>();
    P = std::move(next);
    if (step <= tol) return P;
  }
  throw Error(ErrorCode::NoConvergence, "Riccati iteration did not converge; (A, B) may not be stabilizable");
}

double dare_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P) {
  return (riccati_map(A, B, Q, R, P) - P).lpNorm<Eigen::Infinity>();
}

Mat lqr_gain(const Mat& A, const Mat& B, const Mat& P, const Mat& R) {
  const Mat S = R + B.transpose() * P * B;
  Eigen::FullPivLU<Mat> lu(S);
  if (!lu.isInvertible()) throw Error(ErrorCode::SingularInnerMatrix, "R + B^T P B is singular");
  return -lu.solve(B.transpose() * P * A);
}

namespace {

// Convex function of x used to carve the section. Quadratic atoms without a
// convexity certificate are replaced by the PSD part of their Hessian, which
// majorizes them and so keeps the section an inner approximation.
struct SectionConstraint {
  ZGenerator gen;
  Vec kx;  // K row of the generator's channel
  Mat H_major;
  bool use_major = false;

  double value(const Vec& x) const {
    double gval;
    if (use_major) {
      const auto& q = std::get<QuadraticAtom>(gen.atom);
      gval = x.dot(H_major * x) + gen.alpha * (q.c.dot(x) + q.d);
      return gval + gen.beta * kx.dot(x);
    }
    return gen.value(x, kx.dot(x));
  }
};

double ray_limit(const std::vector<SectionConstraint>& cons, const Polyhedron& X, const Vec& dir) {
  auto worst = [&](double r) {
    const Vec x = r * dir;
    double w = X.max_violation(x);
    for (const SectionConstraint& c : cons) w = std::max(w, c.value(x));
    return w;
  };
  // The set is bounded since X_j is, so some finite radius leaves it.
  double hi = 1.0;
  while (worst(hi) <= 0.0) {
    hi *= 2.0;
    if (hi > 1e12) throw Error(ErrorCode::InvalidPartition, "terminal section is unbounded");
  }
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (worst(mid) <= 0.0 ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace

Polyhedron section_inner_approximation(const MixedSetZj& Z, const Mat& K, const TerminalOptions& opts, bool* exact) {
  const Index n = Z.n;
  std::vector<Vec> rows;
  std::vector<double> rhs;
  for (Index r = 0; r < Z.state_set.rows(); ++r) {
    rows.push_back(Z.state_set.F.row(r).transpose());
    rhs.push_back(Z.state_set.f(r));
  }
  std::vector<SectionConstraint> nonlinear;
  for (const ZGenerator& g : Z.generators) {
    const Vec kx = K.row(g.channel).transpose();
    if (g.affine()) {
      Vec a;
      double b, r;
      g.linear_row(a, b, r);
      rows.push_back(a + b * kx);
      rhs.push_back(r);
      continue;
    }
    SectionConstraint c{g, kx, Mat(), false};
    if (!g.convex) {
      const auto* q = std::get_if<QuadraticAtom>(&g.atom);
      if (!q) throw Error(ErrorCode::Unsupported, "terminal section needs a convex majorant for " + g.describe());
      Eigen::SelfAdjointEigenSolver<Mat> es(g.alpha * q->H);
      c.H_major = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
      c.use_major = true;
    }
    nonlinear.push_back(std::move(c));
  }
  Mat F(static_cast<Index>(rows.size()), n);
  Vec f(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    F.row(static_cast<Index>(r)) = rows[r].transpose();
    f(static_cast<Index>(r)) = rhs[r];
  }
  const Polyhedron linear(F, f);
  if (exact) *exact = nonlinear.empty();
  if (nonlinear.empty()) return remove_redundant(linear);
  if (n != 2) throw Error(ErrorCode::Unsupported, "nonlinear terminal sections are supported for n = 2 only");

  std::vector<Vec> pts;
  for (int k = 0; k < opts.directions; ++k) {
    const double th = 2.0 * std::numbers::pi * k / opts.directions;
    const Vec dir = (Vec(2) << std::cos(th), std::sin(th)).finished();
    pts.push_back(ray_limit(nonlinear, linear, dir) * dir);
  }
  return remove_redundant(convex_hull_2d(pts));
}

Polyhedron maximal_admissible_set(const Mat& A_cl, const Polyhedron& section, const TerminalOptions& opts,
                                  int* k_star) {
  Polyhedron cur = remove_redundant(section);
  const Mat H0 = cur.F;
  const Vec h0 = cur.f;
  Mat Ak = Mat::Identity(A_cl.rows(), A_cl.cols());
  for (int k = 1; k <= opts.k_max; ++k) {
    Ak = A_cl * Ak;
    const Mat Hk = H0 * Ak;
    std::vector<Index> added;
    for (Index r = 0; r < Hk.rows(); ++r) {
      const LpResult lp = lp_maximize(cur, Hk.row(r).transpose());
      if (lp.status != LpStatus::Optimal) throw Error(ErrorCode::NumericalFailure, "MOAS redundancy LP failed");
      if (lp.value > h0(r) + opts.redundancy_tol) added.push_back(r);
    }
    if (added.empty()) {
      if (k_star) *k_star = k - 1;
      return remove_redundant(cur);
    }
    Mat F(cur.rows() + static_cast<Index>(added.size()), cur.dim());
    Vec f(F.rows());
    F.topRows(cur.rows()) = cur.F;
    f.head(cur.rows()) = cur.f;
    for (std::size_t i = 0; i < added.size(); ++i) {
      F.row(cur.rows() + static_cast<Index>(i)) = Hk.row(added[i]);
      f(cur.rows() + static_cast<Index>(i)) = h0(added[i]);
    }
    cur = Polyhedron(F, f);
  }
  throw Error(ErrorCode::NotFinitelyDetermined, "admissible set not determined within k_max steps");
}

double invariance_violation(const Polyhedron& T, const Mat& A_cl) {
  double worst = -std::numeric_limits<double>::infinity();
  const Mat HA = T.F * A_cl;
  for (Index r = 0; r < T.rows(); ++r) {
    const LpResult lp = lp_maximize(T, HA.row(r).transpose());
    if (lp.status != LpStatus::Optimal) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, lp.value - T.f(r));
  }
  return worst;
}

TerminalIngredients build_terminal(const SystemModel& model, const ConstraintUniverse& universe,
                                   const QuadraticStageCost& cost, int partition, const TerminalOptions& opts) {
  cost.check();
  TerminalIngredients out;
  out.partition = partition;
  const MixedSetZj Z = build_zj(universe, model, partition);
  const Vec origin = Vec::Zero(model.n());
  if (!(Z.state_set.max_violation(origin) < -opts.zero_tol)) {
    throw Error(ErrorCode::InteriorityViolated, "origin is not interior to X_" + std::to_string(partition));
  }
  const Vec g0 = eval_g(model, origin);
  for (Index i = 0; i < g0.size(); ++i) {
    if (std::abs(g0(i)) <= opts.zero_tol) {
      throw Error(ErrorCode::InteriorityViolated, "g_" + std::to_string(i + 1) + " vanishes at the origin");
    }
  }
  out.P = solve_dare(model.A, model.B, cost.Q, cost.R);
  out.K = lqr_gain(model.A, model.B, out.P, cost.R);
  const Mat A_cl = model.A + model.B * out.K;
  out.section = section_inner_approximation(Z, out.K, opts, &out.section_exact);
  out.T = maximal_admissible_set(A_cl, out.section, opts, &out.k_star);
  if (is_empty(out.T)) throw Error(ErrorCode::NumericalFailure, "terminal set is empty");
  return out;
}

void write_terminal_csv(std::ostream& os, const Polyhedron& T) {
  for (Index j = 0; j < T.dim(); ++j) os << "H_" << (j + 1) << ",";
  os << "h\n";
  char buf[64];
  for (Index r = 0; r < T.rows(); ++r) {
    for (Index j = 0; j < T.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,", T.F(r, j));
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g\n", T.f(r));
    os << buf;
  }
}

}  // namespace cnmpc
