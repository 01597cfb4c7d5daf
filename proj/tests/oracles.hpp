#pragma once

#include "cnmpc/config.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <tuple>
#include <vector>

// Reference computations shared by the unit tests and the acceptance binary.
// None of them calls into the solver or the transform code under test.
namespace testing {

using cnmpc::Index;
using cnmpc::Mat;
using cnmpc::Vec;

// Bounding box of a polytope from coordinate LPs.
inline void bounding_box(const cnmpc::Polyhedron& P, Vec& lo, Vec& hi) {
  const Index n = P.dim();
  lo.resize(n);
  hi.resize(n);
  for (Index i = 0; i < n; ++i) std::tie(lo(i), hi(i)) = cnmpc::range_of(P, Vec::Unit(n, i));
}

// Direct test of "some u in [lower, upper] has g .* u = v", channel by
// channel, with a margin. Returns +1 inside, -1 outside, 0 too close to tell.
inline int exists_input(const Vec& g, const Vec& v, const cnmpc::InputBox& U, double margin) {
  int verdict = 1;
  for (Index i = 0; i < g.size(); ++i) {
    if (std::abs(g(i)) < 1e-12) {
      if (std::abs(v(i)) > margin) return -1;
      verdict = 0;
      continue;
    }
    const double lo = std::min(g(i) * U.lower(i), g(i) * U.upper(i));
    const double hi = std::max(g(i) * U.lower(i), g(i) * U.upper(i));
    if (v(i) < lo - margin || v(i) > hi + margin) return -1;
    if (v(i) < lo + margin || v(i) > hi - margin) verdict = 0;
  }
  return verdict;
}

// Structured doubling iteration for the Riccati equation; converges
// quadratically and shares no code with the fixed-point solver.
inline Mat sda(const Mat& A, const Mat& B, const Mat& Q, const Mat& R) {
  const Index n = A.rows();
  Mat Ak = A;
  Mat G = B * R.ldlt().solve(B.transpose());
  Mat H = Q;
  for (int it = 0; it < 100; ++it) {
    const Eigen::PartialPivLU<Mat> W((Mat::Identity(n, n) + G * H).eval());
    const Mat WA = W.solve(Ak);
    const Mat WG = W.solve(G);
    const Mat Hn = H + Ak.transpose() * H * WA;
    const Mat Gn = G + Ak * WG * Ak.transpose();
    const Mat An = Ak * WA;
    const double step = (Hn - H).cwiseAbs().maxCoeff();
    H = 0.5 * (Hn + Hn.transpose());
    G = 0.5 * (Gn + Gn.transpose());
    Ak = An;
    if (step <= 1e-15 * std::max(1.0, H.cwiseAbs().maxCoeff())) break;
  }
  return H;
}

// Vertices of a planar polygon by pairwise row intersection.
inline std::vector<Vec> polygon_vertices(const cnmpc::Polyhedron& P) {
  std::vector<Vec> out;
  for (Index i = 0; i < P.rows(); ++i) {
    for (Index j = i + 1; j < P.rows(); ++j) {
      Mat M(2, 2);
      M.row(0) = P.F.row(i);
      M.row(1) = P.F.row(j);
      if (std::abs(M.determinant()) < 1e-12) continue;
      const Vec x = M.partialPivLu().solve((Vec(2) << P.f(i), P.f(j)).finished());
      if ((P.F * x - P.f).maxCoeff() <= 1e-9) out.push_back(x);
    }
  }
  return out;
}

// Point where the ray t * d (t >= 0) leaves {F x <= f}, with 0 inside.
inline Vec ray_exit(const cnmpc::Polyhedron& P, const Vec& d) {
  double t = std::numeric_limits<double>::infinity();
  const Vec Fd = P.F * d;
  for (Index r = 0; r < P.rows(); ++r) {
    if (Fd(r) > 0.0) t = std::min(t, P.f(r) / Fd(r));
  }
  return t * d;
}

// Boundary points of T along seeded random directions.
inline std::vector<Vec> boundary_samples(const cnmpc::Polyhedron& T, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<Vec> out;
  for (int k = 0; k < count; ++k) {
    const Vec d = Vec::NullaryExpr(T.dim(), [&]() { return N(rng); });
    out.push_back(ray_exit(T, d.normalized()));
  }
  return out;
}

}  // namespace testing
