#include "doctest.h"

#include "cnmpc/cost.hpp"

#include <random>

using namespace cnmpc;

TEST_CASE("stage cost in v and in u agree through G(x)") {
  SystemModel M;
  M.A = Mat::Identity(2, 2);
  M.B = Mat::Identity(2, 2);
  M.g = {AffineAtom{(Vec(2) << 1.0, -0.5).finished(), 0.2}, SinusoidAtom{2.0, (Vec(2) << 0.3, 0.1).finished(), 0.4}};
  const QuadraticStageCost c{(Mat(2, 2) << 2.0, 0.5, 0.5, 1.0).finished(), (Mat(2, 2) << 0.3, 0.0, 0.0, 0.7).finished()};
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const Vec x = Vec::NullaryExpr(2, [&]() { return U(rng); });
    const Vec u = Vec::NullaryExpr(2, [&]() { return U(rng); });
    const Vec v = eval_g(M, x).cwiseProduct(u);
    const double expect = x.dot(c.Q * x) + v.dot(c.R * v);
    CHECK(stage_cost_v(c, x, v) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(stage_cost_u(M, c, x, u) == doctest::Approx(expect).epsilon(1e-14));
  }
  CHECK(stage_cost_v(c, Vec::Zero(2), Vec::Zero(2)) == 0.0);
}

TEST_CASE("weights are checked") {
  QuadraticStageCost ok{Mat::Identity(2, 2), Mat::Identity(1, 1)};
  CHECK_NOTHROW(ok.check());
  QuadraticStageCost semidefinite_q{Mat::Zero(2, 2), Mat::Identity(1, 1)};
  CHECK_NOTHROW(semidefinite_q.check());
  QuadraticStageCost bad_q{(Mat(2, 2) << 1.0, 0.0, 0.0, -1.0).finished(), Mat::Identity(1, 1)};
  CHECK_THROWS_AS(bad_q.check(), Error);
  QuadraticStageCost singular_r{Mat::Identity(2, 2), Mat::Zero(1, 1)};
  CHECK_THROWS_AS(singular_r.check(), Error);
  QuadraticStageCost asym{(Mat(2, 2) << 1.0, 0.3, 0.0, 1.0).finished(), Mat::Identity(1, 1)};
  CHECK_THROWS_AS(asym.check(), Error);
}
