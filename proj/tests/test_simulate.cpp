#include "doctest.h"

#include "cnmpc/config.hpp"
#include "cnmpc/simulate.hpp"
#include "helpers.hpp"

#include <sstream>

using namespace cnmpc;

namespace {

struct Toy {
  Problem problem;
  PrunedTree tree;
};

const Toy& toy() {
  static const Toy t = [] {
    Toy out{build_problem(parse_config(testing::toy_config(31, 2, 1, 4))), {}};
    out.tree = prune(out.problem.setup);
    return out;
  }();
  return t;
}

}  // namespace

TEST_CASE("zero steps gives the initial record only") {
  const ClosedLoop loop(toy().problem.setup, toy().tree);
  const Vec x0 = sample_feasible_state(loop, 1);
  SimulationOptions so;
  so.steps = 0;
  const Trajectory t = loop.run(x0, so);
  REQUIRE(t.records.size() == 1);
  CHECK(t.records[0].k == 0);
  CHECK(t.records[0].x == x0);
  CHECK(t.reason == StopReason::Steps);
}

TEST_CASE("the origin is a fixed point") {
  const ClosedLoop loop(toy().problem.setup, toy().tree);
  const Trajectory t = loop.run(Vec::Zero(2), SimulationOptions{});
  REQUIRE(t.records.size() == 1);
  CHECK(t.reason == StopReason::Converged);
  CHECK(t.records[0].u.lpNorm<Eigen::Infinity>() <= 1e-8);
  CHECK(std::abs(t.records[0].V) <= 1e-8);
  const Vec next = toy().problem.setup.model.next_state(Vec::Zero(2), t.records[0].u);
  CHECK(next.lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("closed loop follows the true dynamics and decreases the value") {
  const ScenarioSetup& S = toy().problem.setup;
  const ClosedLoop loop(S, toy().tree);
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const Vec x0 = sample_feasible_state(loop, seed);
    SimulationOptions so;
    so.steps = 40;
    const Trajectory t = loop.run(x0, so);
    REQUIRE(t.reason != StopReason::Infeasible);
    REQUIRE(t.reason != StopReason::Numerical);
    for (std::size_t k = 0; k + 1 < t.records.size(); ++k) {
      const StepRecord& a = t.records[k];
      const StepRecord& b = t.records[k + 1];
      CHECK((S.model.next_state(a.x, a.u) - b.x).lpNorm<Eigen::Infinity>() <= 1e-12);
      CHECK((eval_g(S.model, a.x).cwiseProduct(a.u) - a.v).lpNorm<Eigen::Infinity>() <= 1e-9);
      CHECK(b.V <= a.V - stage_cost_v(S.cost, a.x, a.v) + 1e-6);
    }
    for (const StepRecord& r : t.records) CHECK(r.min_slack >= -1e-7);
    CHECK(t.records.back().x.lpNorm<Eigen::Infinity>() < t.records.front().x.lpNorm<Eigen::Infinity>());
  }
}

TEST_CASE("trajectories are reproducible to the byte") {
  const ScenarioSetup& S = toy().problem.setup;
  const ClosedLoop serial(S, toy().tree, 1);
  const ClosedLoop parallel(S, toy().tree, 3);
  const Vec x0 = sample_feasible_state(serial, 9);
  CHECK(sample_feasible_state(parallel, 9) == x0);
  SimulationOptions so;
  so.steps = 10;
  std::ostringstream a, b;
  write_trajectory_csv(a, serial.run(x0, so));
  write_trajectory_csv(b, parallel.run(x0, so));
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("k,x_1,x_2,u_1,v_1,V,mu_star,min_slack\n", 0) == 0);
  // Logged values are reproduced by re-solving at the logged states.
  const Trajectory t = serial.run(x0, so);
  for (const StepRecord& r : t.records) {
    const SolveResult again = serial.evaluate(r.x);
    CHECK(again.value == r.V);
    CHECK(again.mu_star == r.mu_star);
  }
}

TEST_CASE("a state outside X stops the run") {
  const ClosedLoop loop(toy().problem.setup, toy().tree);
  const Trajectory t = loop.run(Vec::Constant(2, 5.0), SimulationOptions{});
  CHECK(t.records.empty());
  CHECK(t.reason == StopReason::Infeasible);
  CHECK(t.unresolved_state == Vec::Constant(2, 5.0));
}

TEST_CASE("offsets shift the reported coordinates") {
  Trajectory t;
  StepRecord r;
  r.x = (Vec(2) << 1.0, 2.0).finished();
  r.u = Vec::Constant(1, 0.5);
  r.v = Vec::Constant(1, 0.25);
  r.V = 3.0;
  r.mu_star = 7;
  t.records.push_back(r);
  std::ostringstream os;
  write_trajectory_csv(os, t, (Vec(2) << 10.0, 20.0).finished(), Vec::Constant(1, 1.0));
  CHECK(os.str() == "k,x_1,x_2,u_1,v_1,V,mu_star,min_slack\n0,11,22,1.5,0.25,3,7,0\n");
}
