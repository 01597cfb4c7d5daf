#include "cnmpc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>

namespace cnmpc {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::MaxIter: return "MaxIter";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

double ConvexProgram::max_inequality(const Eigen::Ref<const Vec>& z) const {
  double m = -std::numeric_limits<double>::infinity();
  if (G.rows() > 0) m = (G * z - h).maxCoeff();
  for (const ConvexConstraint& c : nonlinear) {
    Vec local(static_cast<Index>(c.vars.size()));
    for (std::size_t k = 0; k < c.vars.size(); ++k) local(static_cast<Index>(k)) = z(c.vars[k]);
    m = std::max(m, c.fn->value(local));
  }
  return m;
}

namespace {

void check_psd(const Mat& H, const char* what) {
  if (H.rows() == 0) return;
  const Mat Hs = 0.5 * (H + H.transpose());
  const double eigmin = Eigen::SelfAdjointEigenSolver<Mat>(Hs, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  if (eigmin < -1e-10) throw Error(ErrorCode::Config, what);
}

}  // namespace

void ConvexProgram::check_shapes() const {
  const Index n = dim();
  if (H.cols() != n || q.size() != n) throw Error(ErrorCode::Config, "objective shape mismatch");
  if (E.rows() != e.size() || (E.rows() > 0 && E.cols() != n)) {
    throw Error(ErrorCode::Config, "equality shape mismatch");
  }
  if (G.rows() != h.size() || (G.rows() > 0 && G.cols() != n)) {
    throw Error(ErrorCode::Config, "inequality shape mismatch");
  }
  for (const ConvexConstraint& c : nonlinear) {
    if (!c.fn) throw Error(ErrorCode::Config, "constraint without function");
    for (Index v : c.vars) {
      if (v < 0 || v >= n) throw Error(ErrorCode::Config, "constraint variable out of range");
    }
  }
}

void ConvexProgram::check() const {
  check_shapes();
  check_psd(H, "objective Hessian is not PSD");
}

namespace {

// Problem restated over w with z = z0 + Z w.
struct Reduced {
  Vec z0;
  Mat Z;
  Mat Hw;
  Vec qw;
  double cw = 0.0;
  Mat Gw;
  Vec hw;
  struct Nonlinear {
    Mat Zs;
    Vec zs0;
    const ConstraintFunction* fn = nullptr;
  };
  std::vector<Nonlinear> nl;
  bool inconsistent = false;

  Index nw() const { return Z.cols(); }
  Index p() const { return Gw.rows() + static_cast<Index>(nl.size()); }
  Vec to_z(const Vec& w) const { return z0 + Z * w; }

  void eval(const Vec& w, Vec& f, Mat& J) const {
    const Index pl = Gw.rows();
    f.resize(p());
    J.resize(p(), nw());
    if (pl > 0) {
      f.head(pl) = Gw * w - hw;
      J.topRows(pl) = Gw;
    }
    for (std::size_t j = 0; j < nl.size(); ++j) {
      const Vec zs = nl[j].zs0 + nl[j].Zs * w;
      const Index r = pl + static_cast<Index>(j);
      f(r) = nl[j].fn->value(zs);
      J.row(r) = (nl[j].Zs.transpose() * nl[j].fn->gradient(zs)).transpose();
    }
  }

  // sum_j lambda_j * Hess f_j, restricted to the PSD part for uncertified ones.
  Mat constraint_hessian(const Vec& w, const Vec& lambda) const {
    Mat Hc = Mat::Zero(nw(), nw());
    const Index pl = Gw.rows();
    for (std::size_t j = 0; j < nl.size(); ++j) {
      const Vec zs = nl[j].zs0 + nl[j].Zs * w;
      Mat hl = nl[j].fn->hessian(zs);
      if (!nl[j].fn->convex()) {
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (hl + hl.transpose()));
        hl = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
      }
      Hc.noalias() += lambda(pl + static_cast<Index>(j)) * (nl[j].Zs.transpose() * hl * nl[j].Zs);
    }
    return Hc;
  }
};

// Phase one needs only the constraints, so the objective can be skipped.
Reduced reduce(const ConvexProgram& P, bool with_objective = true) {
  Reduced R;
  const Index n = P.dim();
  if (P.parametrization) {
    R.z0 = P.parametrization->z0;
    R.Z = P.parametrization->Z;
    if (R.z0.size() != n || R.Z.rows() != n) throw Error(ErrorCode::Config, "parametrization shape mismatch");
  } else if (P.E.rows() == 0) {
    R.z0 = Vec::Zero(n);
    R.Z = Mat::Identity(n, n);
  } else {
    Eigen::ColPivHouseholderQR<Mat> qr(P.E.transpose());
    qr.setThreshold(1e-12);
    const Index rank = qr.rank();
    const Mat Q = qr.householderQ();
    R.Z = Q.rightCols(n - rank);
    R.z0 = P.E.completeOrthogonalDecomposition().solve(P.e);
    const double scale = 1.0 + P.e.lpNorm<Eigen::Infinity>();
    if ((P.E * R.z0 - P.e).lpNorm<Eigen::Infinity>() > 1e-9 * scale) R.inconsistent = true;
  }
  if (with_objective) {
    const Mat HZ = P.H * R.Z;
    R.Hw = R.Z.transpose() * HZ;
    R.Hw = 0.5 * (R.Hw + R.Hw.transpose());
    R.qw = R.Z.transpose() * (P.H * R.z0 + P.q);
    R.cw = 0.5 * R.z0.dot(P.H * R.z0) + P.q.dot(R.z0) + P.constant;
  }
  if (P.G.rows() > 0) {
    R.Gw = P.G * R.Z;
    R.hw = P.h - P.G * R.z0;
  } else {
    R.Gw.resize(0, R.nw());
    R.hw.resize(0);
  }
  for (const ConvexConstraint& c : P.nonlinear) {
    Reduced::Nonlinear nl;
    const Index k = static_cast<Index>(c.vars.size());
    nl.Zs.resize(k, R.nw());
    nl.zs0.resize(k);
    for (Index r = 0; r < k; ++r) {
      nl.Zs.row(r) = R.Z.row(c.vars[static_cast<std::size_t>(r)]);
      nl.zs0(r) = R.z0(c.vars[static_cast<std::size_t>(r)]);
    }
    nl.fn = c.fn.get();
    R.nl.push_back(std::move(nl));
  }
  return R;
}

Vec project_start(const Reduced& R, const std::optional<Vec>& z) {
  if (!z || z->size() != R.z0.size() || R.nw() == 0) return Vec::Zero(R.nw());
  return R.Z.colPivHouseholderQr().solve(*z - R.z0);
}

// Generic primal-dual iteration over y with p inequality rows f(y) <= 0.
struct IpmProblem {
  Index N = 0;
  Index p = 0;
  Mat Hobj;
  Vec qobj;
  std::function<void(const Vec&, Vec&, Mat&)> eval;
  std::function<Mat(const Vec&, const Vec&)> hess;
};

struct IpmState {
  Vec y, s, lambda;
};

enum class IpmExit { Converged, Stopped, Stalled, MaxIter, Numerical };

struct IpmRun {
  IpmExit exit = IpmExit::MaxIter;
  int iterations = 0;
  double rd = 0.0, rp = 0.0, mu = 0.0;
  double objective = 0.0;  // at the last iterate
};

double max_step(const Vec& v, const Vec& dv) {
  double a = 1.0;
  for (Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  }
  return a;
}

// Primal-dual barrier iteration that keeps f(y) < 0 at every iterate, so the
// slacks are always s = -f(y). Each barrier subproblem is solved by Newton
// steps with an Armijo search on the log-barrier merit; the barrier parameter
// drops once the subproblem is solved to within 10 times its value. A
// positive definite modification of the Hessian keeps every step a descent
// direction for the merit, including on constraints that are not convex.
// `fast` selects the superlinear barrier schedule, otherwise a factor of 0.5.
IpmRun run_ipm(const IpmProblem& P, IpmState& st, const SolverOptions& opts, bool fast,
               const std::function<bool(const Vec&, const Vec&)>& stop = {}) {
  IpmRun run;
  const double pd = static_cast<double>(std::max<Index>(P.p, 1));
  const double scale_d = 1.0 + P.qobj.lpNorm<Eigen::Infinity>();
  Vec f;
  Mat J;
  P.eval(st.y, f, J);
  st.s = -f;
  if (P.p > 0 && !(st.s.array() > 0.0).all()) {
    run.exit = IpmExit::Numerical;
    return run;
  }
  auto merit = [&](const Vec& y, const Vec& s, double mub) {
    return 0.5 * y.dot(P.Hobj * y) + P.qobj.dot(y) - mub * s.array().log().sum();
  };
  double mub = P.p > 0 ? std::max(st.s.dot(st.lambda) / pd, 0.1 * opts.mu_tol) : 0.0;
  double floor_rd = std::numeric_limits<double>::infinity();
  int floor_it = 0;
  int tiny_steps = 0;

  for (int it = 0; it <= opts.max_iter; ++it) {
    run.iterations = it;
    const Vec rd = P.Hobj * st.y + P.qobj + J.transpose() * st.lambda;
    const double mu = P.p > 0 ? st.s.dot(st.lambda) / pd : 0.0;
    // Stationarity is measured relative to the size of the gradient terms.
    const double scale_rd = scale_d + (P.p > 0 ? (J.transpose() * st.lambda).lpNorm<Eigen::Infinity>() : 0.0);
    run.rd = rd.lpNorm<Eigen::Infinity>() / scale_rd;
    run.rp = 0.0;
    run.mu = mu;
    run.objective = 0.5 * st.y.dot(P.Hobj * st.y) + P.qobj.dot(st.y);
    if (!std::isfinite(run.rd) || !std::isfinite(mu)) {
      run.exit = IpmExit::Numerical;
      return run;
    }
    if (stop && stop(st.y, f)) {
      run.exit = IpmExit::Stopped;
      return run;
    }
    if (run.rd <= opts.stationarity_tol && mu <= opts.mu_tol) {
      run.exit = IpmExit::Converged;
      return run;
    }
    // Near the boundary the Newton system loses digits and stationarity
    // levels off; accept the looser level once it stops improving.
    if (mu <= opts.mu_tol) {
      if (run.rd < 0.99 * floor_rd) {
        floor_rd = run.rd;
        floor_it = it;
      } else if (it - floor_it >= 8) {
        run.exit = run.rd <= opts.accept_tol ? IpmExit::Converged : IpmExit::Stalled;
        return run;
      }
    }
    if (it == opts.max_iter) break;

    // Barrier subproblem error; tighten the barrier while it is small.
    for (int k = 0; k < 50 && P.p > 0; ++k) {
      const double comp = (st.s.cwiseProduct(st.lambda).array() - mub).abs().maxCoeff();
      if (std::max(run.rd, comp) > 10.0 * mub || mub <= 0.1 * opts.mu_tol) break;
      mub = std::max(0.1 * opts.mu_tol, fast ? std::min(0.2 * mub, std::pow(mub, 1.5)) : 0.5 * mub);
    }

    const Vec d = st.lambda.cwiseQuotient(st.s);
    Mat M = P.Hobj + P.hess(st.y, st.lambda);
    M.noalias() += J.transpose() * d.asDiagonal() * J;
    M = 0.5 * (M + M.transpose());
    double delta = 1e-12 * std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
    Eigen::LLT<Mat> llt;
    bool ok = false;
    for (int tries = 0; tries < 12; ++tries) {
      llt.compute(M + delta * Mat::Identity(P.N, P.N));
      if (llt.info() == Eigen::Success) {
        ok = true;
        break;
      }
      delta *= 100.0;
    }
    if (!ok) {
      run.exit = IpmExit::Numerical;
      return run;
    }

    // Newton step for rd = 0 and s.*lambda = mub with ds = -J dy; the right
    // hand side equals minus the merit gradient.
    const Vec rc = st.s.cwiseProduct(st.lambda) - Vec::Constant(P.p, mub);
    const Vec grad = -(-rd + J.transpose() * rc.cwiseQuotient(st.s));
    const Vec dy = llt.solve(-grad);
    const Vec dl = (-rc + st.lambda.cwiseProduct(J * dy)).cwiseQuotient(st.s);
    if (!dy.allFinite() || !dl.allFinite()) {
      run.exit = IpmExit::Numerical;
      return run;
    }

    const double slope = grad.dot(dy);
    const double phi0 = merit(st.y, st.s, mub);
    const double tau = std::max(0.99, 1.0 - mub);
    Vec fn;
    Mat Jn;
    Vec sn;
    double alpha = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 60 && alpha > 1e-14; ++bt, alpha *= 0.5) {
      P.eval(st.y + alpha * dy, fn, Jn);
      sn = -fn;
      if (P.p > 0 && !(sn.array() >= (1.0 - tau) * st.s.array()).all()) continue;
      if (merit(st.y + alpha * dy, sn, mub) <= phi0 + 1e-4 * alpha * std::min(slope, 0.0)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      run.exit = IpmExit::Stalled;
      return run;
    }
    tiny_steps = alpha < 1e-6 ? tiny_steps + 1 : 0;
    if (tiny_steps >= 5) {
      run.exit = IpmExit::Stalled;
      return run;
    }
    const double alpha_l = std::min(1.0, tau * max_step(st.lambda, dl));
    st.y += alpha * dy;
    st.s = sn;
    st.lambda += alpha_l * dl;
    // Keep the multipliers within a wide band around the central path.
    for (Index i = 0; i < P.p; ++i) {
      const double c = mub / st.s(i);
      st.lambda(i) = std::clamp(st.lambda(i), c / 1e10, c * 1e10);
    }
    f = std::move(fn);
    J = std::move(Jn);
    if (opts.trace) {
      *opts.trace << "iter " << it << " mu " << mu << " rd " << run.rd << " barrier " << mub << " alpha " << alpha
                  << "\n";
    }
  }
  run.exit = IpmExit::MaxIter;
  return run;
}

struct PhaseOneCore {
  bool feasible = false;
  bool interior = false;
  Vec w;
  double t_star = 0.0;
  int iterations = 0;
};

double max_f(const Reduced& R, const Vec& w) {
  Vec f;
  Mat J;
  R.eval(w, f, J);
  return f.size() > 0 ? f.maxCoeff() : -std::numeric_limits<double>::infinity();
}

// min t s.t. f_i(w) <= t, t >= -1. Stops as soon as max f < stop_below.
PhaseOneCore phase_one_core(const Reduced& R, const Vec& w_start, const SolverOptions& opts, double stop_below) {
  PhaseOneCore out;
  out.w = w_start;
  const Index p = R.p();
  if (p == 0) {
    out.feasible = out.interior = true;
    out.t_star = -std::numeric_limits<double>::infinity();
    return out;
  }
  const double f0 = max_f(R, w_start);
  if (!std::isfinite(f0)) throw Error(ErrorCode::NumericalFailure, "non-finite constraint value at start");
  if (f0 < stop_below) {
    out.feasible = out.interior = true;
    out.t_star = f0;
    return out;
  }

  const Index nw = R.nw();
  IpmProblem P;
  P.N = nw + 1;
  P.p = p + 1;
  P.Hobj = Mat::Zero(P.N, P.N);
  P.qobj = Vec::Zero(P.N);
  P.qobj(nw) = 1.0;
  P.eval = [&R, nw, p](const Vec& y, Vec& f, Mat& J) {
    Vec fr;
    Mat Jr;
    R.eval(y.head(nw), fr, Jr);
    f.resize(p + 1);
    J.setZero(p + 1, nw + 1);
    f.head(p) = fr.array() - y(nw);
    J.topLeftCorner(p, nw) = Jr;
    J.col(nw).head(p).setConstant(-1.0);
    f(p) = -y(nw) - 1.0;
    J(p, nw) = -1.0;
  };
  P.hess = [&R, nw, p](const Vec& y, const Vec& lambda) {
    Mat Hm = Mat::Zero(nw + 1, nw + 1);
    Hm.topLeftCorner(nw, nw) = R.constraint_hessian(y.head(nw), lambda.head(p));
    return Hm;
  };

  auto init = [&]() {
    IpmState st;
    st.y.resize(nw + 1);
    st.y.head(nw) = w_start;
    st.y(nw) = std::max(f0, -0.5) + 1.0;
    Vec f;
    Mat J;
    P.eval(st.y, f, J);
    st.lambda = Vec::Constant(p + 1, 1.0 / static_cast<double>(p + 1));
    st.s = -f;
    return st;
  };

  Vec best_w = w_start;
  double best = f0;
  auto stop = [&](const Vec& y, const Vec& fy) {
    // fy(i) = f_i(w) - t, so f_i(w) = fy(i) + t.
    const double mf = fy.head(p).maxCoeff() + y(nw);
    if (mf < best) {
      best = mf;
      best_w = y.head(nw);
    }
    return mf < stop_below;
  };
  IpmState st = init();
  IpmRun run = run_ipm(P, st, opts, true, stop);
  IpmRun first = run;
  if (run.exit != IpmExit::Converged && run.exit != IpmExit::Stopped) {
    IpmState retry = init();
    const IpmRun second = run_ipm(P, retry, opts, false, stop);
    if (second.exit == IpmExit::Converged || second.exit == IpmExit::Stopped) run = second;
    else first = second.exit == IpmExit::Stalled ? second : first;
  }
  out.iterations = run.iterations;
  out.w = best_w;
  out.t_star = best;
  out.interior = out.t_star < 0.0;
  if (run.exit == IpmExit::Stopped || run.exit == IpmExit::Converged) {
    out.feasible = out.t_star <= opts.infeasibility_threshold;
    return out;
  }
  // Neither run finished: decide only when the answer is unambiguous. A run
  // that stalled close to the central path bounds the optimum from below by
  // the current value minus the duality gap.
  if (out.t_star <= opts.infeasibility_threshold) {
    out.feasible = true;
    return out;
  }
  for (const IpmRun& r : {run, first}) {
    if (r.exit == IpmExit::Stalled && r.rd <= 1e-6 &&
        r.objective - static_cast<double>(p + 1) * r.mu > opts.infeasibility_threshold) {
      out.feasible = false;
      return out;
    }
  }
  if (run.exit == IpmExit::Numerical) throw Error(ErrorCode::NumericalFailure, "phase one failed");
  throw Error(ErrorCode::MaxIter, "phase one did not converge");
}

}  // namespace

PhaseOneResult phase_one(const ConvexProgram& program, const SolverOptions& opts) {
  program.check_shapes();
  const Reduced R = reduce(program, false);
  PhaseOneResult res;
  if (R.inconsistent) {
    res.feasible = false;
    res.z = R.z0;
    res.t_star = std::numeric_limits<double>::infinity();
    return res;
  }
  const PhaseOneCore core = phase_one_core(R, project_start(R, program.warm_start), opts, -1e-8);
  res.feasible = core.feasible;
  res.strictly_interior = core.interior;
  res.z = R.to_z(core.w);
  res.t_star = core.t_star;
  res.iterations = core.iterations;
  return res;
}

SolveOutcome solve(const ConvexProgram& program, const SolverOptions& opts) {
  program.check_shapes();
  const Reduced R = reduce(program);
  // Only the curvature on the equality-constrained subspace matters.
  check_psd(R.Hw, "objective Hessian is not PSD on the feasible subspace");
  SolveOutcome out;
  const Index nw = R.nw();
  const Index p = R.p();
  const Index pl = R.Gw.rows();
  if (R.inconsistent) {
    out.status = SolveStatus::Infeasible;
    out.z = R.z0;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }

  if (p == 0) {
    Vec w = Vec::Zero(nw);
    if (nw > 0) {
      Eigen::LDLT<Mat> ldlt(R.Hw);
      w = ldlt.solve(-R.qw);
      if (!w.allFinite() || (R.Hw * w + R.qw).lpNorm<Eigen::Infinity>() > 1e-8 * (1.0 + R.qw.lpNorm<Eigen::Infinity>())) {
        out.status = SolveStatus::NumericalFailure;
        return out;
      }
    }
    out.status = SolveStatus::Optimal;
    out.z = R.to_z(w);
    out.value = program.objective(out.z);
    out.kkt.stationarity = nw > 0 ? (R.Hw * w + R.qw).lpNorm<Eigen::Infinity>() : 0.0;
    return out;
  }

  // A start well inside the feasible set when one exists.
  const PhaseOneCore start = phase_one_core(R, project_start(R, program.warm_start), opts, -1e-3);
  out.iterations = start.iterations;
  if (!start.feasible) {
    out.status = SolveStatus::Infeasible;
    out.z = R.to_z(start.w);
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }

  // When the feasible set has no interior point the barrier needs a little
  // room, so the constraints are relaxed by the phase-one level.
  const double relax = start.t_star < -1e-12 ? 0.0 : std::max(start.t_star, 0.0) + 1e-10;
  IpmProblem P;
  P.N = nw;
  P.p = p;
  P.Hobj = R.Hw;
  P.qobj = R.qw;
  P.eval = [&R, relax](const Vec& w, Vec& f, Mat& J) {
    R.eval(w, f, J);
    f.array() -= relax;
  };
  P.hess = [&R](const Vec& w, const Vec& lambda) { return R.constraint_hessian(w, lambda); };

  auto init = [&]() {
    IpmState st;
    st.y = start.w;
    Vec f;
    Mat J;
    P.eval(st.y, f, J);
    st.s = -f;
    const double mu0 = std::max(1e-2, 1e-2 * (1.0 + std::abs(R.qw.dot(st.y))));
    st.lambda = (mu0 / st.s.array()).min(1e6).max(1e-8).matrix();
    return st;
  };

  IpmState st = init();
  IpmRun run = run_ipm(P, st, opts, true);
  if (run.exit != IpmExit::Converged) {
    IpmState alt = init();
    const IpmRun second = run_ipm(P, alt, opts, false);
    const bool better = second.exit == IpmExit::Converged || std::max(second.rd, second.mu) < std::max(run.rd, run.mu);
    if (better) {
      st = alt;
      run = second;
    }
  }
  out.iterations += run.iterations;

  Vec f;
  Mat J;
  P.eval(st.y, f, J);
  st.s = -f;
  f.array() += relax;
  out.z = R.to_z(st.y);
  out.value = program.objective(out.z);
  out.lambda_linear = st.lambda.head(pl);
  out.lambda_nonlinear = st.lambda.tail(p - pl);
  out.kkt.stationarity = (R.Hw * st.y + R.qw + J.transpose() * st.lambda).lpNorm<Eigen::Infinity>();
  double eq_res = 0.0;
  if (program.E.rows() > 0) eq_res = (program.E * out.z - program.e).lpNorm<Eigen::Infinity>();
  out.kkt.primal = std::max({0.0, f.maxCoeff(), eq_res});
  out.kkt.complementarity = st.s.dot(st.lambda) / static_cast<double>(p);

  const bool accepted = run.rd <= opts.accept_tol && run.mu <= opts.accept_tol && out.kkt.primal <= opts.primal_tol;
  if (run.exit == IpmExit::Converged || accepted) {
    out.status = SolveStatus::Optimal;
  } else if (run.exit == IpmExit::Numerical || !out.z.allFinite()) {
    out.status = SolveStatus::NumericalFailure;
  } else {
    out.status = SolveStatus::MaxIter;
  }
  return out;
}

}  // namespace cnmpc
