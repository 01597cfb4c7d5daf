#include "cnmpc/polyhedron.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cnmpc {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidPartition: return "InvalidPartition";
    case ErrorCode::UncertifiedPartition: return "UncertifiedPartition";
    case ErrorCode::NotEquilibrium: return "NotEquilibrium";
    case ErrorCode::UnsupportedAtomForShift: return "UnsupportedAtomForShift";
    case ErrorCode::InconsistentArtificialInput: return "InconsistentArtificialInput";
    case ErrorCode::InputBoxViolation: return "InputBoxViolation";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SingularInnerMatrix: return "SingularInnerMatrix";
    case ErrorCode::NotFinitelyDetermined: return "NotFinitelyDetermined";
    case ErrorCode::InteriorityViolated: return "InteriorityViolated";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::StateOutsideX: return "StateOutsideX";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::MaxIter: return "MaxIter";
    case ErrorCode::Unsupported: return "Unsupported";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

Polyhedron::Polyhedron(Mat F_, Vec f_) : F(std::move(F_)), f(std::move(f_)) {
  if (F.rows() != f.size()) {
    throw Error(ErrorCode::InvalidPartition, "polyhedron row count mismatch");
  }
}

Polyhedron Polyhedron::box(const Vec& lower, const Vec& upper) {
  const Index n = lower.size();
  Mat F(2 * n, n);
  F << Mat::Identity(n, n), -Mat::Identity(n, n);
  Vec f(2 * n);
  f << upper, -lower;
  return {F, f};
}

double Polyhedron::max_violation(const Eigen::Ref<const Vec>& x) const {
  if (rows() == 0) return -std::numeric_limits<double>::infinity();
  return (F * x - f).maxCoeff();
}

Polyhedron Polyhedron::intersect(const Polyhedron& other) const {
  if (rows() == 0) return other;
  if (other.rows() == 0) return *this;
  Mat G(rows() + other.rows(), dim());
  G << F, other.F;
  Vec g(rows() + other.rows());
  g << f, other.f;
  return {G, g};
}

Polyhedron Polyhedron::shifted(const Vec& shift) const { return {F, f - F * shift}; }

Polyhedron Polyhedron::preimage(const Mat& M) const { return {F * M, f}; }

namespace {

constexpr double kFeasTol = 1e-9;

// Rows scaled to unit norm; zero rows are dropped (reported through `empty`
// when they are violated).
struct Normalized {
  Mat G;
  Vec h;
  bool empty = false;
};

Normalized normalize(const Polyhedron& P) {
  Normalized out;
  std::vector<Index> keep;
  std::vector<double> scale;
  for (Index i = 0; i < P.rows(); ++i) {
    const double nrm = P.F.row(i).norm();
    if (nrm < 1e-14) {
      if (P.f(i) < -kFeasTol) out.empty = true;
      continue;
    }
    keep.push_back(i);
    scale.push_back(nrm);
  }
  out.G.resize(static_cast<Index>(keep.size()), P.dim());
  out.h.resize(static_cast<Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.G.row(static_cast<Index>(k)) = P.F.row(keep[k]) / scale[k];
    out.h(static_cast<Index>(k)) = P.f(keep[k]) / scale[k];
  }
  return out;
}

// Primal active-set method for max c^T x s.t. G x <= h (rows unit norm),
// started from a feasible x. Each step moves along the projection of c onto
// the null space of the working set; a zero projection triggers the multiplier
// test. Bland-style smallest-index choices avoid cycling.
LpResult active_set_lp(const Mat& G, const Vec& h, const Vec& c, Vec x) {
  const Index n = G.cols();
  const Index p = G.rows();
  LpResult res;
  std::vector<Index> W;
  std::vector<char> in_w(static_cast<std::size_t>(p), 0);
  const double cnorm = std::max(1.0, c.norm());
  const int max_iter = static_cast<int>(50 * (p + n) + 100);

  for (int iter = 0; iter < max_iter; ++iter) {
    const Index k = static_cast<Index>(W.size());
    Mat Aw(k, n);
    for (Index j = 0; j < k; ++j) Aw.row(j) = G.row(W[static_cast<std::size_t>(j)]);

    Vec d;
    if (k == 0) {
      d = c;
    } else if (k >= n) {
      d = Vec::Zero(n);
    } else {
      Eigen::HouseholderQR<Mat> qr(Aw.transpose());
      const Mat Q = qr.householderQ();
      const Mat Q2 = Q.rightCols(n - k);
      d = Q2 * (Q2.transpose() * c);
    }

    if (d.norm() > 1e-11 * cnorm) {
      d /= d.norm();
      double alpha = std::numeric_limits<double>::infinity();
      Index enter = -1;
      for (Index i = 0; i < p; ++i) {
        if (in_w[static_cast<std::size_t>(i)]) continue;
        const double gd = G.row(i).dot(d);
        if (gd <= 1e-12) continue;
        const double slack = std::max(0.0, h(i) - G.row(i).dot(x));
        const double a = slack / gd;
        if (a < alpha - 1e-13) {
          alpha = a;
          enter = i;
        }
      }
      if (enter < 0) {
        res.status = LpStatus::Unbounded;
        res.x = x;
        res.value = std::numeric_limits<double>::infinity();
        return res;
      }
      x += alpha * d;
      W.push_back(enter);
      in_w[static_cast<std::size_t>(enter)] = 1;
      continue;
    }

    if (k == 0) break;  // c == 0: any feasible point is optimal
    const Vec lambda = Aw.transpose().colPivHouseholderQr().solve(c);
    Index leave = -1;
    for (Index j = 0; j < k; ++j) {
      if (lambda(j) < -1e-10 * cnorm &&
          (leave < 0 || W[static_cast<std::size_t>(j)] < W[static_cast<std::size_t>(leave)])) {
        leave = j;
      }
    }
    if (leave < 0) {
      res.status = LpStatus::Optimal;
      res.x = x;
      res.value = c.dot(x);
      return res;
    }
    in_w[static_cast<std::size_t>(W[static_cast<std::size_t>(leave)])] = 0;
    W.erase(W.begin() + leave);
  }
  if (W.empty() && c.norm() <= 1e-11 * cnorm) {
    res.status = LpStatus::Optimal;
    res.x = x;
    res.value = c.dot(x);
    return res;
  }
  res.status = LpStatus::IterationLimit;
  res.x = x;
  res.value = c.dot(x);
  return res;
}

}  // namespace

ChebyshevBall chebyshev_center(const Polyhedron& P, double radius_cap) {
  const Index n = P.dim();
  const Normalized N = normalize(P);
  ChebyshevBall ball;
  if (N.empty) {
    ball.center = Vec::Zero(n);
    ball.radius = -1.0;
    return ball;
  }
  const Index p = N.G.rows();
  // Variables (x, r): G x + r <= h, r <= cap.
  Mat G(p + 1, n + 1);
  G.setZero();
  G.topLeftCorner(p, n) = N.G;
  G.col(n).head(p).setOnes();
  G(p, n) = 1.0;
  Vec h(p + 1);
  h << N.h, radius_cap;
  Vec start = Vec::Zero(n + 1);
  start(n) = p > 0 ? std::min(N.h.minCoeff(), radius_cap) : radius_cap;
  Vec c = Vec::Zero(n + 1);
  c(n) = 1.0;
  const LpResult r = active_set_lp(G, h, c, start);
  if (r.status != LpStatus::Optimal) {
    throw Error(ErrorCode::NumericalFailure, "Chebyshev center LP did not converge");
  }
  ball.center = r.x.head(n);
  ball.radius = r.x(n);
  return ball;
}

bool is_empty(const Polyhedron& P, double tol) { return chebyshev_center(P).radius < -tol; }

LpResult lp_maximize(const Polyhedron& P, const Eigen::Ref<const Vec>& c,
                     const std::optional<Vec>& start) {
  const Normalized N = normalize(P);
  if (N.empty) return {};
  Vec x0;
  if (start) {
    x0 = *start;
  } else {
    const ChebyshevBall ball = chebyshev_center(P);
    if (ball.radius < -kFeasTol) return {};
    x0 = ball.center;
  }
  return active_set_lp(N.G, N.h, c, x0);
}

LpResult lp_minimize(const Polyhedron& P, const Eigen::Ref<const Vec>& c,
                     const std::optional<Vec>& start) {
  LpResult r = lp_maximize(P, -c, start);
  r.value = -r.value;
  return r;
}

bool is_bounded(const Polyhedron& P) {
  const ChebyshevBall ball = chebyshev_center(P);
  if (ball.radius < -kFeasTol) return true;  // empty
  for (Index j = 0; j < P.dim(); ++j) {
    for (double sgn : {1.0, -1.0}) {
      Vec c = Vec::Zero(P.dim());
      c(j) = sgn;
      if (lp_maximize(P, c, ball.center).status != LpStatus::Optimal) return false;
    }
  }
  return true;
}

std::pair<double, double> range_of(const Polyhedron& P, const Eigen::Ref<const Vec>& c) {
  const ChebyshevBall ball = chebyshev_center(P);
  if (ball.radius < -kFeasTol) throw Error(ErrorCode::InvalidPartition, "range over empty polyhedron");
  const LpResult lo = lp_minimize(P, c, ball.center);
  const LpResult hi = lp_maximize(P, c, ball.center);
  if (lo.status != LpStatus::Optimal || hi.status != LpStatus::Optimal) {
    throw Error(ErrorCode::InvalidPartition, "range over unbounded polyhedron");
  }
  return {lo.value, hi.value};
}

Polyhedron remove_redundant(const Polyhedron& P, double tol) {
  Normalized N = normalize(P);
  const Index n = P.dim();
  if (N.empty) return P;
  // Exact duplicates first (keep the tightest rhs).
  std::vector<Index> order(static_cast<std::size_t>(N.G.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::vector<char> alive(order.size(), 1);
  for (Index i = 0; i < N.G.rows(); ++i) {
    if (!alive[static_cast<std::size_t>(i)]) continue;
    for (Index j = i + 1; j < N.G.rows(); ++j) {
      if (!alive[static_cast<std::size_t>(j)]) continue;
      if ((N.G.row(i) - N.G.row(j)).lpNorm<Eigen::Infinity>() < 1e-12) {
        if (N.h(j) < N.h(i)) N.h(i) = N.h(j);
        alive[static_cast<std::size_t>(j)] = 0;
      }
    }
  }
  const ChebyshevBall ball = chebyshev_center(P);
  if (ball.radius < -kFeasTol) return P;

  for (Index i = 0; i < N.G.rows(); ++i) {
    if (!alive[static_cast<std::size_t>(i)]) continue;
    std::vector<Index> rows;
    for (Index j = 0; j < N.G.rows(); ++j) {
      if (alive[static_cast<std::size_t>(j)]) rows.push_back(j);
    }
    Mat G(static_cast<Index>(rows.size()), n);
    Vec h(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      G.row(static_cast<Index>(r)) = N.G.row(rows[r]);
      h(static_cast<Index>(r)) = N.h(rows[r]) + (rows[r] == i ? 1.0 : 0.0);
    }
    const LpResult lp = active_set_lp(G, h, N.G.row(i).transpose(), ball.center);
    if (lp.status == LpStatus::Optimal && lp.value <= N.h(i) + tol) {
      alive[static_cast<std::size_t>(i)] = 0;
    }
  }
  std::vector<Index> rows;
  for (Index j = 0; j < N.G.rows(); ++j) {
    if (alive[static_cast<std::size_t>(j)]) rows.push_back(j);
  }
  Mat G(static_cast<Index>(rows.size()), n);
  Vec h(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    G.row(static_cast<Index>(r)) = N.G.row(rows[r]);
    h(static_cast<Index>(r)) = N.h(rows[r]);
  }
  return {G, h};
}

namespace {

void push_unique(std::vector<Vec>& pts, const Vec& v) {
  for (const Vec& q : pts) {
    if ((q - v).lpNorm<Eigen::Infinity>() < 1e-9 * std::max(1.0, v.lpNorm<Eigen::Infinity>())) return;
  }
  pts.push_back(v);
}

bool next_combination(std::vector<Index>& comb, Index p) {
  const Index k = static_cast<Index>(comb.size());
  for (Index i = k - 1; i >= 0; --i) {
    if (comb[static_cast<std::size_t>(i)] < p - k + i) {
      ++comb[static_cast<std::size_t>(i)];
      for (Index j = i + 1; j < k; ++j) {
        comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
      }
      return true;
    }
  }
  return false;
}

double binomial(Index p, Index k) {
  double r = 1.0;
  for (Index i = 1; i <= k; ++i) r = r * static_cast<double>(p - k + i) / static_cast<double>(i);
  return r;
}

}  // namespace

std::vector<Vec> vertices(const Polyhedron& P, std::size_t max_combinations) {
  const Polyhedron R = remove_redundant(P);
  const Index n = R.dim();
  const Index p = R.rows();
  std::vector<Vec> pts;
  if (p < n) return pts;
  if (binomial(p, n) > static_cast<double>(max_combinations)) {
    throw Error(ErrorCode::Unsupported, "vertex enumeration too large");
  }
  std::vector<Index> comb(static_cast<std::size_t>(n));
  std::iota(comb.begin(), comb.end(), 0);
  do {
    Mat M(n, n);
    Vec b(n);
    for (Index j = 0; j < n; ++j) {
      M.row(j) = R.F.row(comb[static_cast<std::size_t>(j)]);
      b(j) = R.f(comb[static_cast<std::size_t>(j)]);
    }
    Eigen::FullPivLU<Mat> lu(M);
    if (lu.rank() < n) continue;
    const Vec v = lu.solve(b);
    if (R.max_violation(v) <= 1e-9 * std::max(1.0, v.lpNorm<Eigen::Infinity>())) push_unique(pts, v);
  } while (next_combination(comb, p));

  if (n == 2 && pts.size() > 2) {
    Vec centroid = Vec::Zero(2);
    for (const Vec& v : pts) centroid += v;
    centroid /= static_cast<double>(pts.size());
    std::sort(pts.begin(), pts.end(), [&](const Vec& a, const Vec& b) {
      return std::atan2(a(1) - centroid(1), a(0) - centroid(0)) <
             std::atan2(b(1) - centroid(1), b(0) - centroid(0));
    });
  }
  return pts;
}

bool is_subset(const Polyhedron& P, const Polyhedron& Q, double tol) {
  const ChebyshevBall ball = chebyshev_center(P);
  if (ball.radius < -kFeasTol) return true;
  for (Index i = 0; i < Q.rows(); ++i) {
    const LpResult r = lp_maximize(P, Q.F.row(i).transpose(), ball.center);
    if (r.status != LpStatus::Optimal) return false;
    if (r.value > Q.f(i) + tol * std::max(1.0, Q.F.row(i).norm())) return false;
  }
  return true;
}

Polyhedron convex_hull_2d(const std::vector<Vec>& points) {
  std::vector<Vec> pts = points;
  std::sort(pts.begin(), pts.end(), [](const Vec& a, const Vec& b) {
    return a(0) < b(0) || (a(0) == b(0) && a(1) < b(1));
  });
  auto cross = [](const Vec& o, const Vec& a, const Vec& b) {
    return (a(0) - o(0)) * (b(1) - o(1)) - (a(1) - o(1)) * (b(0) - o(0));
  };
  std::vector<Vec> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Vec& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 1e-14) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 1e-14) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k > 0 ? k - 1 : 0);
  if (hull.size() < 3) throw Error(ErrorCode::InvalidPartition, "degenerate planar hull");
  Mat F(static_cast<Index>(hull.size()), 2);
  Vec f(static_cast<Index>(hull.size()));
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec& a = hull[i];
    const Vec& b = hull[(i + 1) % hull.size()];
    Vec nrm(2);
    nrm << b(1) - a(1), a(0) - b(0);
    nrm /= nrm.norm();
    F.row(static_cast<Index>(i)) = nrm.transpose();
    f(static_cast<Index>(i)) = nrm.dot(a);
  }
  return {F, f};
}

}  // namespace cnmpc
