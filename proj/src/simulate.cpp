#include "cnmpc/simulate.hpp"

#include "cnmpc/transform.hpp"

#include <chrono>
#include <cstdio>
#include <ostream>
#include <random>

namespace cnmpc {

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::Steps: return "steps";
    case StopReason::Converged: return "converged";
    case StopReason::Infeasible: return "infeasible";
    case StopReason::Numerical: return "numerical";
    case StopReason::Budget: return "budget";
  }
  return "?";
}

ClosedLoop::ClosedLoop(const ScenarioSetup& setup, const PrunedTree& tree, int jobs)
    : setup_(setup), tree_(tree), jobs_(std::max(1, jobs)) {}

SolveResult ClosedLoop::evaluate(const Vec& x) const { return solve_state(setup_, tree_, x, jobs_); }

std::optional<StepRecord> ClosedLoop::step(const Vec& x, int k) const {
  SolveResult r;
  try {
    r = evaluate(x);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::StateOutsideX) return std::nullopt;
    throw;
  }
  if (r.status == SolveStatus::Infeasible) return std::nullopt;
  if (r.status != SolveStatus::Optimal) throw Error(ErrorCode::NumericalFailure, "no scenario solved at the state");
  StepRecord rec;
  rec.k = k;
  rec.x = x;
  rec.u = r.u0;
  rec.v = r.v0;
  rec.V = r.value;
  rec.mu_star = r.mu_star;
  rec.solver_slack = r.min_slack;
  const InputBox& U = setup_.universe.input_box;
  const double su = std::min((rec.u - U.lower).minCoeff(), (U.upper - rec.u).minCoeff());
  rec.min_slack = std::min(-setup_.universe.state_set.max_violation(x), su);
  return rec;
}

Trajectory ClosedLoop::run(const Vec& x0, const SimulationOptions& opts) const {
  Trajectory t;
  Vec x = x0;
  for (int k = 0;; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    std::optional<StepRecord> rec;
    try {
      rec = step(x, k);
    } catch (const Error& e) {
      t.reason = StopReason::Numerical;
      t.message = e.what();
      t.unresolved_state = x;
      return t;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!rec) {
      t.reason = StopReason::Infeasible;
      t.message = "no feasible scenario at step " + std::to_string(k);
      t.unresolved_state = x;
      return t;
    }
    t.records.push_back(*rec);
    if (opts.step_budget_seconds > 0.0 && secs > opts.step_budget_seconds) {
      t.reason = StopReason::Budget;
      t.message = "controller took " + std::to_string(secs) + " s at step " + std::to_string(k);
      return t;
    }
    if (x.lpNorm<Eigen::Infinity>() <= opts.stop_tol) {
      t.reason = StopReason::Converged;
      return t;
    }
    if (k == opts.steps) {
      t.reason = StopReason::Steps;
      return t;
    }
    x = setup_.model.next_state(x, rec->u);
  }
}

Vec sample_feasible_state(const ClosedLoop& loop, std::uint64_t seed, int max_halvings) {
  const Polyhedron& X = loop.setup().universe.state_set;
  const Index n = X.dim();
  Vec lo(n), hi(n);
  for (Index i = 0; i < n; ++i) std::tie(lo(i), hi(i)) = range_of(X, Vec::Unit(n, i));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Vec x(n);
  for (int tries = 0;; ++tries) {
    if (tries == 100000) throw Error(ErrorCode::NumericalFailure, "rejection sampling of X failed");
    for (Index i = 0; i < n; ++i) x(i) = lo(i) + U(rng) * (hi(i) - lo(i));
    if (X.contains(x, 0.0)) break;
  }
  for (int h = 0; h <= max_halvings; ++h) {
    if (loop.evaluate(x).status == SolveStatus::Optimal) return x;
    x *= 0.5;
  }
  throw Error(ErrorCode::NumericalFailure, "no feasible state found along the ray to the origin");
}

namespace {

void put(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << ',' << buf;
}

}  // namespace

void write_trajectory_csv(std::ostream& os, const Trajectory& t, const Vec& x_offset, const Vec& u_offset) {
  if (t.records.empty()) {
    os << "k\n";
    return;
  }
  const Index n = t.records.front().x.size();
  const Index m = t.records.front().u.size();
  os << 'k';
  for (Index i = 1; i <= n; ++i) os << ",x_" << i;
  for (Index i = 1; i <= m; ++i) os << ",u_" << i;
  for (Index i = 1; i <= m; ++i) os << ",v_" << i;
  os << ",V,mu_star,min_slack\n";
  const Vec dx = x_offset.size() ? x_offset : Vec::Zero(n);
  const Vec du = u_offset.size() ? u_offset : Vec::Zero(m);
  for (const StepRecord& r : t.records) {
    os << r.k;
    for (Index i = 0; i < n; ++i) put(os, r.x(i) + dx(i));
    for (Index i = 0; i < m; ++i) put(os, r.u(i) + du(i));
    for (Index i = 0; i < m; ++i) put(os, r.v(i));
    put(os, r.V);
    os << ',' << r.mu_star;
    put(os, r.min_slack);
    os << '\n';
  }
}

}  // namespace cnmpc
