#include "cnmpc/model.hpp"

#include "cnmpc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace cnmpc {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

double atom_value(const NonlinearityAtom& atom, const Eigen::Ref<const Vec>& x) {
  return std::visit(overloaded{
                        [&](const AffineAtom& a) { return a.c.dot(x) + a.d; },
                        [&](const QuadraticAtom& a) { return x.dot(a.H * x) + a.c.dot(x) + a.d; },
                        [&](const SinusoidAtom& a) { return a.a * std::cos(a.w.dot(x) + a.phi); },
                    },
                    atom);
}

Vec atom_gradient(const NonlinearityAtom& atom, const Eigen::Ref<const Vec>& x) {
  return std::visit(overloaded{
                        [&](const AffineAtom& a) -> Vec { return a.c; },
                        [&](const QuadraticAtom& a) -> Vec { return 2.0 * (a.H * x) + a.c; },
                        [&](const SinusoidAtom& a) -> Vec { return -a.a * std::sin(a.w.dot(x) + a.phi) * a.w; },
                    },
                    atom);
}

Mat atom_hessian(const NonlinearityAtom& atom, const Eigen::Ref<const Vec>& x) {
  return std::visit(overloaded{
                        [&](const AffineAtom& a) -> Mat { return Mat::Zero(a.c.size(), a.c.size()); },
                        [&](const QuadraticAtom& a) -> Mat { return 2.0 * a.H; },
                        [&](const SinusoidAtom& a) -> Mat {
                          return -a.a * std::cos(a.w.dot(x) + a.phi) * (a.w * a.w.transpose());
                        },
                    },
                    atom);
}

bool is_affine(const NonlinearityAtom& atom) { return std::holds_alternative<AffineAtom>(atom); }

const char* atom_kind(const NonlinearityAtom& atom) {
  return std::visit(overloaded{
                        [](const AffineAtom&) { return "affine"; },
                        [](const QuadraticAtom&) { return "quadratic"; },
                        [](const SinusoidAtom&) { return "sinusoid"; },
                    },
                    atom);
}

Index atom_dim(const NonlinearityAtom& atom) {
  return std::visit(overloaded{
                        [](const AffineAtom& a) { return a.c.size(); },
                        [](const QuadraticAtom& a) { return a.c.size(); },
                        [](const SinusoidAtom& a) { return a.w.size(); },
                    },
                    atom);
}

void SystemModel::check() const {
  if (A.rows() != A.cols()) throw Error(ErrorCode::Config, "A must be square");
  if (B.rows() != A.rows()) throw Error(ErrorCode::Config, "B must have n rows");
  if (static_cast<Index>(g.size()) != B.cols()) throw Error(ErrorCode::Config, "need exactly one g_i per input");
  for (const NonlinearityAtom& atom : g) {
    if (atom_dim(atom) != n()) throw Error(ErrorCode::Config, "atom dimension differs from n");
    if (const auto* q = std::get_if<QuadraticAtom>(&atom)) {
      if (q->H.rows() != n() || q->H.cols() != n()) throw Error(ErrorCode::Config, "quadratic atom H must be n x n");
      if ((q->H - q->H.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        throw Error(ErrorCode::Config, "quadratic atom H must be symmetric");
      }
    }
  }
}

Vec SystemModel::next_state(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& u) const {
  return A * x + B * eval_g(*this, x).cwiseProduct(u);
}

Vec eval_g(const SystemModel& model, const Eigen::Ref<const Vec>& x) {
  Vec out(model.m());
  for (Index i = 0; i < model.m(); ++i) out(i) = atom_value(model.g[static_cast<std::size_t>(i)], x);
  return out;
}

Mat eval_g_jacobian(const SystemModel& model, const Eigen::Ref<const Vec>& x) {
  Mat J(model.m(), model.n());
  for (Index i = 0; i < model.m(); ++i) J.row(i) = atom_gradient(model.g[static_cast<std::size_t>(i)], x).transpose();
  return J;
}

std::vector<Mat> eval_g_hessians(const SystemModel& model, const Eigen::Ref<const Vec>& x) {
  std::vector<Mat> out;
  out.reserve(model.g.size());
  for (const NonlinearityAtom& atom : model.g) out.push_back(atom_hessian(atom, x));
  return out;
}

const char* to_string(SignCase c) {
  return c == SignCase::NonnegConcave ? "NonnegConcave" : "NonposConvex";
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::NonnegConcave: return "NonnegConcave";
    case Verdict::NonposConvex: return "NonposConvex";
    case Verdict::Reject: return "Reject";
  }
  return "Reject";
}

std::optional<SignCase> sign_case_from_string(const std::string& s) {
  if (s == "nonneg_concave" || s == "NonnegConcave") return SignCase::NonnegConcave;
  if (s == "nonpos_convex" || s == "NonposConvex") return SignCase::NonposConvex;
  return std::nullopt;
}

namespace {

// Range of an indefinite quadratic over a small polytope: the extremes sit at
// stationary points of the restriction to some face, so every face (row
// subset of size <= n) is tried.
std::pair<double, double> quadratic_range_by_faces(const QuadraticAtom& q, const Polyhedron& P) {
  const Polyhedron R = remove_redundant(P);
  const Index n = R.dim();
  const Index p = R.rows();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  std::size_t budget = 2'000'000;
  for (Index k = 0; k <= std::min(n, p); ++k) {
    std::vector<Index> comb(static_cast<std::size_t>(k));
    std::iota(comb.begin(), comb.end(), 0);
    while (true) {
      if (budget-- == 0) throw Error(ErrorCode::Unsupported, "face enumeration too large");
      Mat K = Mat::Zero(n + k, n + k);
      Vec rhs(n + k);
      K.topLeftCorner(n, n) = 2.0 * q.H;
      rhs.head(n) = -q.c;
      for (Index j = 0; j < k; ++j) {
        const Index r = comb[static_cast<std::size_t>(j)];
        K.block(0, n + j, n, 1) = R.F.row(r).transpose();
        K.block(n + j, 0, 1, n) = R.F.row(r);
        rhs(n + j) = R.f(r);
      }
      Eigen::FullPivLU<Mat> lu(K);
      if (lu.rank() == n + k) {
        const Vec x = lu.solve(rhs).head(n);
        if (R.max_violation(x) <= 1e-9) {
          const double v = atom_value(q, x);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      // next combination
      Index i = k - 1;
      while (i >= 0 && comb[static_cast<std::size_t>(i)] == p - k + i) --i;
      if (i < 0) break;
      ++comb[static_cast<std::size_t>(i)];
      for (Index j = i + 1; j < k; ++j) comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  for (const Vec& v : vertices(R)) {
    const double val = atom_value(q, v);
    lo = std::min(lo, val);
    hi = std::max(hi, val);
  }
  return {lo, hi};
}

// min over P of x^T H x + c^T x + d for PSD H.
double convex_quadratic_min(const QuadraticAtom& q, const Polyhedron& P) {
  ConvexProgram prog;
  prog.H = 2.0 * q.H;
  prog.q = q.c;
  prog.constant = q.d;
  prog.G = P.F;
  prog.h = P.f;
  prog.warm_start = chebyshev_center(P).center;
  // Tiny negative eigenvalues within the tolerance are clipped for the PSD check.
  Eigen::SelfAdjointEigenSolver<Mat> es(prog.H);
  prog.H = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
  const SolveOutcome out = solve(prog);
  if (out.status != SolveStatus::Optimal) {
    throw Error(ErrorCode::NumericalFailure, "quadratic range solve failed");
  }
  return atom_value(q, out.z);
}

bool interval_inside(double lo, double hi, double a, double b, double tol) {
  return lo >= a - tol && hi <= b + tol;
}

}  // namespace

CurvatureCertificate certify_curvature(const NonlinearityAtom& atom, const Polyhedron& P,
                                       std::optional<SignCase> declared, const CertifyOptions& opts) {
  if (is_empty(P)) throw Error(ErrorCode::InvalidPartition, "partition polyhedron is empty");
  if (!is_bounded(P)) throw Error(ErrorCode::InvalidPartition, "partition polyhedron is unbounded");

  CurvatureCertificate cert;
  bool convex_ok = false;
  bool concave_ok = false;

  if (const auto* a = std::get_if<AffineAtom>(&atom)) {
    const auto [lo, hi] = range_of(P, a->c);
    cert.lower = lo + a->d;
    cert.upper = hi + a->d;
    convex_ok = concave_ok = true;
  } else if (const auto* q = std::get_if<QuadraticAtom>(&atom)) {
    const Vec eig = Eigen::SelfAdjointEigenSolver<Mat>(q->H, Eigen::EigenvaluesOnly).eigenvalues();
    convex_ok = eig.minCoeff() >= -opts.eig_tol;
    concave_ok = eig.maxCoeff() <= opts.eig_tol;
    std::vector<Vec> verts;
    if (convex_ok || concave_ok) verts = vertices(P);
    if (convex_ok) {
      cert.lower = convex_quadratic_min(*q, P);
      cert.upper = -std::numeric_limits<double>::infinity();
      for (const Vec& v : verts) cert.upper = std::max(cert.upper, atom_value(atom, v));
    } else if (concave_ok) {
      const QuadraticAtom neg{-q->H, -q->c, -q->d};
      cert.upper = -convex_quadratic_min(neg, P);
      cert.lower = std::numeric_limits<double>::infinity();
      for (const Vec& v : verts) cert.lower = std::min(cert.lower, atom_value(atom, v));
    } else {
      std::tie(cert.lower, cert.upper) = quadratic_range_by_faces(*q, P);
      std::ostringstream os;
      os << "quadratic Hessian is indefinite (eigenvalues " << eig.minCoeff() << ", " << eig.maxCoeff() << ")";
      cert.reason = os.str();
    }
  } else {
    const auto& sn = std::get<SinusoidAtom>(atom);
    const auto [lo, hi] = range_of(P, sn.w);
    const double L = lo + sn.phi;
    const double U = hi + sn.phi;
    const double pi = std::numbers::pi;
    // Shift the argument interval so that its midpoint lies in [-pi/2, 3pi/2).
    const double mid = 0.5 * (L + U);
    const double k = std::floor((mid + 0.5 * pi) / (2.0 * pi));
    const double Ls = L - 2.0 * pi * k;
    const double Us = U - 2.0 * pi * k;
    const bool cos_nonneg_concave = interval_inside(Ls, Us, -0.5 * pi, 0.5 * pi, opts.angle_tol);
    const bool cos_nonpos_convex = interval_inside(Ls, Us, 0.5 * pi, 1.5 * pi, opts.angle_tol);
    if (sn.a == 0.0) {
      convex_ok = concave_ok = true;
    } else if (sn.a > 0.0) {
      concave_ok = cos_nonneg_concave;
      convex_ok = cos_nonpos_convex;
    } else {
      concave_ok = cos_nonpos_convex;
      convex_ok = cos_nonneg_concave;
    }
    // Exact range of a*cos over the argument interval.
    double cmin = std::min(std::cos(L), std::cos(U));
    double cmax = std::max(std::cos(L), std::cos(U));
    for (double t = std::ceil(L / pi) * pi; t <= U; t += pi) {
      const double c = std::cos(t);
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
    }
    cert.lower = sn.a >= 0.0 ? sn.a * cmin : sn.a * cmax;
    cert.upper = sn.a >= 0.0 ? sn.a * cmax : sn.a * cmin;
    if (!convex_ok && !concave_ok) {
      std::ostringstream os;
      os << "sinusoid argument range [" << L << ", " << U << "] crosses a curvature change";
      cert.reason = os.str();
    }
  }

  const bool nonneg = cert.lower >= -opts.sign_tol;
  const bool nonpos = cert.upper <= opts.sign_tol;
  if (declared) {
    if (*declared == SignCase::NonnegConcave && nonneg) cert.sign = SignCase::NonnegConcave;
    if (*declared == SignCase::NonposConvex && nonpos) cert.sign = SignCase::NonposConvex;
  } else if (nonneg && (concave_ok || !nonpos || !convex_ok)) {
    cert.sign = SignCase::NonnegConcave;
  } else if (nonpos) {
    cert.sign = SignCase::NonposConvex;
  }

  if (!cert.sign) {
    cert.verdict = Verdict::Reject;
    if (cert.reason.empty()) {
      std::ostringstream os;
      os << "mixed sign: range [" << cert.lower << ", " << cert.upper << "]";
      cert.reason = os.str();
    } else {
      cert.reason += "; mixed sign";
    }
    return cert;
  }
  cert.curvature_ok = *cert.sign == SignCase::NonnegConcave ? concave_ok : convex_ok;
  if (cert.curvature_ok) {
    cert.verdict = *cert.sign == SignCase::NonnegConcave ? Verdict::NonnegConcave : Verdict::NonposConvex;
  } else {
    cert.verdict = Verdict::Reject;
    if (cert.reason.empty()) {
      cert.reason = std::string("sign holds but curvature does not match ") + to_string(*cert.sign);
    }
  }
  return cert;
}

bool ConstraintUniverse::certified() const {
  if (partitions.empty()) return false;
  return std::all_of(partitions.begin(), partitions.end(), [](const Partition& p) { return p.certified(); });
}

int ConstraintUniverse::locate(const Eigen::Ref<const Vec>& x, double tol) const {
  for (const Partition& p : partitions) {
    if (p.set.contains(x, tol)) return p.index;
  }
  return 0;
}

std::string ValidationReport::to_text() const {
  std::ostringstream os;
  os << (pass ? "PASS" : "FAIL") << "\n";
  for (std::size_t j = 0; j < certificates.size(); ++j) {
    for (std::size_t i = 0; i < certificates[j].size(); ++i) {
      const CurvatureCertificate& c = certificates[j][i];
      os << "  X_" << (j + 1) << " g_" << (i + 1) << ": " << to_string(c.verdict) << " range [" << c.lower << ", "
         << c.upper << "]";
      if (!c.reason.empty()) os << " (" << c.reason << ")";
      os << "\n";
    }
  }
  os << "  coverage: " << coverage_method << " (heuristic), " << coverage_points << " points, " << coverage_misses
     << " uncovered\n";
  for (const std::string& w : warnings) os << "  warning: " << w << "\n";
  for (const std::string& f : failures) os << "  failure: " << f << "\n";
  return os.str();
}

namespace {

void coverage_check(const ConstraintUniverse& U, ValidationReport& report) {
  const Polyhedron& X = U.state_set;
  const Index n = X.dim();
  Vec lo(n), hi(n);
  for (Index j = 0; j < n; ++j) {
    std::tie(lo(j), hi(j)) = range_of(X, Vec::Unit(n, j));
  }
  const double diameter = (hi - lo).norm();
  const double pitch = std::max(U.grid_pitch_fraction * diameter, 1e-12);
  std::vector<Index> counts(static_cast<std::size_t>(n));
  double total = 1.0;
  for (Index j = 0; j < n; ++j) {
    counts[static_cast<std::size_t>(j)] = static_cast<Index>(std::floor((hi(j) - lo(j)) / pitch)) + 1;
    total *= static_cast<double>(counts[static_cast<std::size_t>(j)]);
  }
  auto check_point = [&](const Vec& x) {
    if (!X.contains(x, 1e-12)) return;
    ++report.coverage_points;
    if (!U.in_union(x, 1e-9)) {
      if (report.coverage_misses == 0) {
        std::ostringstream os;
        os << "state set point not covered by any partition: [" << x.transpose() << "]";
        report.failures.push_back(os.str());
      }
      ++report.coverage_misses;
    }
  };
  if (total <= 1e6) {
    report.coverage_method = "grid";
    std::vector<Index> idx(static_cast<std::size_t>(n), 0);
    while (true) {
      Vec x(n);
      for (Index j = 0; j < n; ++j) {
        const Index c = counts[static_cast<std::size_t>(j)];
        x(j) = c > 1 ? lo(j) + (hi(j) - lo(j)) * static_cast<double>(idx[static_cast<std::size_t>(j)]) / static_cast<double>(c - 1)
                     : 0.5 * (lo(j) + hi(j));
      }
      check_point(x);
      Index j = 0;
      while (j < n && ++idx[static_cast<std::size_t>(j)] == counts[static_cast<std::size_t>(j)]) {
        idx[static_cast<std::size_t>(j)] = 0;
        ++j;
      }
      if (j == n) break;
    }
  } else {
    report.coverage_method = "sampled";
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int s = 0; s < 100000; ++s) {
      Vec x(n);
      for (Index j = 0; j < n; ++j) x(j) = lo(j) + (hi(j) - lo(j)) * unif(rng);
      check_point(x);
    }
  }
  if (report.coverage_misses > 0) report.pass = false;
}

}  // namespace

ValidationReport validate_universe(const SystemModel& model, const ConstraintUniverse& universe,
                                   const CertifyOptions& opts) {
  ValidationReport report;
  if (!universe.input_box.origin_strictly_interior()) {
    report.pass = false;
    report.failures.push_back("input box: origin not strictly interior (need lower_i < 0 < upper_i)");
  }
  if (universe.input_box.lower.size() != model.m() || universe.input_box.upper.size() != model.m()) {
    report.pass = false;
    report.failures.push_back("input box dimension differs from m");
  }
  if (universe.partitions.empty()) {
    report.pass = false;
    report.failures.push_back("no partitions");
  }
  for (const Partition& part : universe.partitions) {
    std::vector<CurvatureCertificate> row;
    for (Index i = 0; i < model.m(); ++i) {
      std::optional<SignCase> declared;
      if (static_cast<std::size_t>(i) < part.declared.size()) declared = part.declared[static_cast<std::size_t>(i)];
      CurvatureCertificate cert;
      try {
        cert = certify_curvature(model.g[static_cast<std::size_t>(i)], part.set, declared, opts);
      } catch (const Error& e) {
        cert.verdict = Verdict::Reject;
        cert.reason = e.what();
      }
      std::ostringstream where;
      where << "X_" << part.index << " g_" << (i + 1) << ": ";
      if (cert.verdict == Verdict::Reject) {
        if (cert.sign && universe.policy == CurvaturePolicy::SignOnly) {
          report.warnings.push_back(where.str() + cert.reason + " (sign verified, solved locally)");
        } else {
          report.pass = false;
          report.failures.push_back(where.str() + cert.reason);
        }
      }
      row.push_back(cert);
    }
    report.certificates.push_back(std::move(row));
  }
  if (!universe.partitions.empty()) coverage_check(universe, report);
  return report;
}

ConstraintUniverse certify_universe(const SystemModel& model, ConstraintUniverse universe, const CertifyOptions& opts) {
  model.check();
  const ValidationReport report = validate_universe(model, universe, opts);
  if (!report.pass) throw Error(ErrorCode::UncertifiedPartition, report.to_text());
  for (std::size_t j = 0; j < universe.partitions.size(); ++j) {
    Partition& part = universe.partitions[j];
    part.sign_case.clear();
    part.curvature_ok.clear();
    for (const CurvatureCertificate& c : report.certificates[j]) {
      part.sign_case.push_back(*c.sign);
      part.curvature_ok.push_back(c.curvature_ok);
    }
  }
  return universe;
}

ShiftedProblem shift_to_equilibrium(const SystemModel& model, const ConstraintUniverse& universe, const Vec& x_eq,
                                    const Vec& u_eq, double residual_tol) {
  for (const NonlinearityAtom& atom : model.g) {
    if (!is_affine(atom)) {
      throw Error(ErrorCode::UnsupportedAtomForShift, std::string("cannot shift ") + atom_kind(atom) + " gain");
    }
  }
  ShiftedProblem out;
  out.report.residual = (model.next_state(x_eq, u_eq) - x_eq).lpNorm<Eigen::Infinity>();
  if (!(out.report.residual <= residual_tol)) {
    std::ostringstream os;
    os << "equilibrium residual " << out.report.residual << " exceeds " << residual_tol;
    throw Error(ErrorCode::NotEquilibrium, os.str());
  }
  out.report.input_in_box = universe.input_box.contains(u_eq);
  out.report.state_in_set = universe.state_set.contains(x_eq);

  out.model.A = model.A;
  out.model.B = model.B;
  for (Index i = 0; i < model.m(); ++i) {
    const auto& a = std::get<AffineAtom>(model.g[static_cast<std::size_t>(i)]);
    out.model.A += model.B.col(i) * a.c.transpose() * u_eq(i);
    out.model.g.push_back(AffineAtom{a.c, a.c.dot(x_eq) + a.d});
  }

  out.universe = universe;
  out.universe.state_set = universe.state_set.shifted(x_eq);
  out.universe.input_box.lower = universe.input_box.lower - u_eq;
  out.universe.input_box.upper = universe.input_box.upper - u_eq;
  for (Partition& part : out.universe.partitions) {
    part.set = part.set.shifted(x_eq);
    part.sign_case.clear();
    part.curvature_ok.clear();
    for (Index i = 0; i < out.model.m(); ++i) {
      std::optional<SignCase> declared;
      if (static_cast<std::size_t>(i) < part.declared.size()) declared = part.declared[static_cast<std::size_t>(i)];
      const CurvatureCertificate c = certify_curvature(out.model.g[static_cast<std::size_t>(i)], part.set, declared);
      if (c.verdict == Verdict::Reject) {
        throw Error(ErrorCode::UncertifiedPartition, "shifted partition failed certification: " + c.reason);
      }
      part.sign_case.push_back(*c.sign);
      part.curvature_ok.push_back(true);
    }
  }
  return out;
}

}  // namespace cnmpc
