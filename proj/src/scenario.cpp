#include "cnmpc/scenario.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <random>
#include <ostream>
#include <sstream>
#include <thread>

namespace cnmpc {

ScenarioIndex scenario_count(int N, int s) {
  if (N < 0 || s < 1) throw Error(ErrorCode::OutOfRange, "need N >= 0 and s >= 1");
  ScenarioIndex total = 1;
  for (int k = 0; k < N; ++k) {
    if (total > std::numeric_limits<ScenarioIndex>::max() / static_cast<ScenarioIndex>(s)) {
      throw Error(ErrorCode::OutOfRange, "s^N overflows");
    }
    total *= static_cast<ScenarioIndex>(s);
  }
  return total;
}

ScenarioIndex encode(const std::vector<int>& eps, int s) {
  scenario_count(static_cast<int>(eps.size()), s);
  ScenarioIndex mu = 1;
  ScenarioIndex power = 1;
  for (int e : eps) {
    if (e < 1 || e > s) throw Error(ErrorCode::OutOfRange, "coefficient " + std::to_string(e) + " outside 1..s");
    mu += static_cast<ScenarioIndex>(e - 1) * power;
    power *= static_cast<ScenarioIndex>(s);
  }
  return mu;
}

std::vector<int> decode(ScenarioIndex mu, int N, int s) {
  const ScenarioIndex total = scenario_count(N, s);
  if (mu < 1 || mu > total) throw Error(ErrorCode::OutOfRange, "scenario index " + std::to_string(mu));
  std::vector<int> eps(static_cast<std::size_t>(N));
  ScenarioIndex rest = mu - 1;
  for (int k = 0; k < N; ++k) {
    eps[static_cast<std::size_t>(k)] = static_cast<int>(rest % static_cast<ScenarioIndex>(s)) + 1;
    rest /= static_cast<ScenarioIndex>(s);
  }
  return eps;
}

ScenarioSetup make_setup(SystemModel model, ConstraintUniverse universe, QuadraticStageCost cost,
                         TerminalIngredients terminal, int horizon, SolverOptions solver) {
  if (horizon < 1) throw Error(ErrorCode::Config, "horizon must be at least 1");
  ScenarioSetup S;
  S.zsets = build_all_zj(universe, model);
  S.v_lower = Vec::Constant(model.m(), std::numeric_limits<double>::infinity());
  S.v_upper = Vec::Constant(model.m(), -std::numeric_limits<double>::infinity());
  for (const Partition& part : universe.partitions) {
    for (Index i = 0; i < model.m(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      const CurvatureCertificate c = certify_curvature(model.g[k], part.set, part.sign_case[k]);
      for (double g : {c.lower, c.upper}) {
        for (double u : {universe.input_box.lower(i), universe.input_box.upper(i)}) {
          S.v_lower(i) = std::min(S.v_lower(i), g * u);
          S.v_upper(i) = std::max(S.v_upper(i), g * u);
        }
      }
    }
  }
  S.model = std::move(model);
  S.universe = std::move(universe);
  S.cost = std::move(cost);
  S.terminal = std::move(terminal);
  S.horizon = horizon;
  S.solver = solver;
  return S;
}

namespace {

struct RowBuilder {
  std::vector<Eigen::RowVectorXd> dense;
  std::vector<double> rhs;
  Index dim;

  void add_block(const Polyhedron& P, Index col) {
    for (Index r = 0; r < P.rows(); ++r) add(P.F.row(r), col, P.f(r));
  }
  void add(const Eigen::RowVectorXd& a, Index col, double b) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(dim);
    row.segment(col, a.size()) = a;
    dense.push_back(std::move(row));
    rhs.push_back(b);
  }
  void finish(Mat& G, Vec& h) const {
    G.resize(static_cast<Index>(dense.size()), dim);
    h.resize(G.rows());
    for (std::size_t r = 0; r < dense.size(); ++r) {
      G.row(static_cast<Index>(r)) = dense[r];
      h(static_cast<Index>(r)) = rhs[r];
    }
  }
};

}  // namespace

ConvexProgram assemble_prefix(const ScenarioSetup& setup, const std::vector<int>& eps, const std::optional<Vec>& x0,
                              EndConstraint end, bool relax_tail) {
  const SystemModel& M = setup.model;
  const Index n = M.n();
  const Index m = M.m();
  const int N = setup.horizon;
  const int L = static_cast<int>(eps.size());
  if (L > N) throw Error(ErrorCode::OutOfRange, "prefix longer than the horizon");
  const Index nx = (N + 1) * n;
  const Index dim = nx + N * m;
  auto xi = [&](int k) { return static_cast<Index>(k) * n; };
  auto vi = [&](int k) { return nx + static_cast<Index>(k) * m; };

  ConvexProgram P;
  P.H = Mat::Zero(dim, dim);
  for (int k = 0; k < N; ++k) {
    P.H.block(xi(k), xi(k), n, n) = 2.0 * setup.cost.Q;
    P.H.block(vi(k), vi(k), m, m) = 2.0 * setup.cost.R;
  }
  P.H.block(xi(N), xi(N), n, n) = 2.0 * setup.terminal.P;
  P.q = Vec::Zero(dim);

  // Dynamics equalities, plus x(0) = x0 when given.
  const Index neq = N * n + (x0 ? n : 0);
  P.E = Mat::Zero(neq, dim);
  P.e = Vec::Zero(neq);
  for (int k = 0; k < N; ++k) {
    const Index r = static_cast<Index>(k) * n;
    P.E.block(r, xi(k + 1), n, n) = Mat::Identity(n, n);
    P.E.block(r, xi(k), n, n) = -M.A;
    P.E.block(r, vi(k), n, m) = -M.B;
  }
  if (x0) {
    P.E.block(N * n, 0, n, n) = Mat::Identity(n, n);
    P.e.tail(n) = *x0;
  }

  // Condensed parametrization: w = v, or w = (x0, v) when x0 is free.
  const Index nw = N * m + (x0 ? 0 : n);
  const Index voff = x0 ? 0 : n;
  ConvexProgram::Parametrization par{Vec::Zero(dim), Mat::Zero(dim, nw)};
  Vec xk = x0 ? *x0 : Vec::Zero(n);
  Mat Xk = Mat::Zero(n, nw);
  if (!x0) Xk.leftCols(n) = Mat::Identity(n, n);
  for (int k = 0; k <= N; ++k) {
    par.z0.segment(xi(k), n) = xk;
    par.Z.block(xi(k), 0, n, nw) = Xk;
    if (k == N) break;
    par.Z.block(vi(k), voff + static_cast<Index>(k) * m, m, m) = Mat::Identity(m, m);
    xk = M.A * xk;
    Mat next = M.A * Xk;
    next.middleCols(voff + static_cast<Index>(k) * m, m) += M.B;
    Xk = std::move(next);
  }
  // Channels whose gain vanishes at a given x0 carry v0_i = 0; their column
  // is dropped instead of leaving a zero-width slab for the solver.
  std::vector<bool> singular0(static_cast<std::size_t>(m), false);
  if (x0) {
    const std::vector<Index> S = split_indices(M, *x0).S;
    if (!S.empty()) {
      std::vector<Index> keep;
      for (Index c = 0; c < nw; ++c) keep.push_back(c);
      for (const Index i : S) singular0[static_cast<std::size_t>(i)] = true;
      std::erase_if(keep, [&](Index c) { return c < m && singular0[static_cast<std::size_t>(c)]; });
      Mat Zk(dim, static_cast<Index>(keep.size()));
      for (std::size_t c = 0; c < keep.size(); ++c) Zk.col(static_cast<Index>(c)) = par.Z.col(keep[c]);
      par.Z = std::move(Zk);
    }
  }
  P.parametrization = std::move(par);

  RowBuilder rows{{}, {}, dim};
  for (int k = 0; k < L; ++k) {
    const int j = eps[static_cast<std::size_t>(k)];
    if (j < 1 || j > setup.s()) throw Error(ErrorCode::OutOfRange, "partition index in scenario");
    const MixedSetZj& Z = setup.zsets[static_cast<std::size_t>(j - 1)];
    rows.add_block(Z.state_set, xi(k));
    for (const ZGenerator& g : Z.generators) {
      if (k == 0 && singular0[static_cast<std::size_t>(g.channel)]) continue;
      if (g.affine()) {
        Vec a;
        double b, r;
        g.linear_row(a, b, r);
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(dim);
        row.segment(xi(k), n) = a.transpose();
        row(vi(k) + g.channel) = b;
        rows.dense.push_back(std::move(row));
        rows.rhs.push_back(r);
      } else {
        std::vector<Index> vars;
        for (Index t = 0; t < n; ++t) vars.push_back(xi(k) + t);
        vars.push_back(vi(k) + g.channel);
        std::ostringstream label;
        label << "step " << k << " Z_" << j << " channel " << (g.channel + 1);
        P.nonlinear.push_back({std::move(vars), make_constraint(g), label.str()});
      }
    }
  }
  const bool full = L == N;
  if (!full && relax_tail) {
    for (int k = L; k < N; ++k) {
      rows.add_block(setup.universe.state_set, xi(k));
      rows.add_block(Polyhedron::box(setup.v_lower, setup.v_upper), vi(k));
    }
  } else if (!full) {
    rows.add_block(setup.universe.state_set, xi(L));
  }
  if (end == EndConstraint::Terminal && (full || relax_tail)) rows.add_block(setup.terminal.T, xi(N));
  rows.finish(P.G, P.h);
  return P;
}

ConvexProgram assemble(const ScenarioSetup& setup, ScenarioIndex mu, const std::optional<Vec>& x0) {
  return assemble_prefix(setup, decode(mu, setup.horizon, setup.s()), x0, EndConstraint::Terminal, true);
}

namespace {

class Pruner {
 public:
  Pruner(const ScenarioSetup& setup, const PruneOptions& opts, EndConstraint end)
      : setup_(setup), opts_(opts), end_(end), rng_(opts.restart_seed) {
    stats_.feasible_prefixes.assign(static_cast<std::size_t>(setup.horizon), 0);
    const Index n = setup.model.n();
    x_lo_.resize(n);
    x_hi_.resize(n);
    for (Index i = 0; i < n; ++i) {
      const auto [lo, hi] = range_of(setup.universe.state_set, Vec::Unit(n, i));
      x_lo_(i) = lo;
      x_hi_(i) = hi;
    }
  }

  std::vector<ScenarioIndex> run() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<int> eps;
    descend(eps, std::nullopt);
    stats_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::move(feasible_);
  }

  PruneStats stats() const { return stats_; }

 private:
  PhaseOneResult attempt(ConvexProgram& prog, const std::vector<int>& eps, std::optional<Vec> start) {
    prog.warm_start = std::move(start);
    try {
      return phase_one(prog, setup_.solver);
    } catch (const Error& e) {
      std::ostringstream os;
      os << "pruning prefix (";
      for (std::size_t k = 0; k < eps.size(); ++k) os << (k ? "," : "") << eps[k];
      os << "): " << e.what();
      throw Error(ErrorCode::NumericalFailure, os.str());
    }
  }

  // Trajectory from a uniform x(0) in the bounding box of X under uniform
  // artificial inputs in the v box.
  Vec random_start(Index dim) {
    const SystemModel& M = setup_.model;
    const Index n = M.n();
    const Index m = M.m();
    const int N = setup_.horizon;
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Vec z(dim);
    Vec x(n);
    for (Index i = 0; i < n; ++i) x(i) = x_lo_(i) + U(rng_) * (x_hi_(i) - x_lo_(i));
    const Index nx = static_cast<Index>(N + 1) * n;
    for (int k = 0; k <= N; ++k) {
      z.segment(static_cast<Index>(k) * n, n) = x;
      if (k == N) break;
      Vec v(m);
      for (Index i = 0; i < m; ++i) {
        v(i) = setup_.v_lower(i) + U(rng_) * (setup_.v_upper(i) - setup_.v_lower(i));
      }
      z.segment(nx + static_cast<Index>(k) * m, m) = v;
      x = M.A * x + M.B * v;
    }
    return z;
  }

  std::optional<Vec> feasible(const std::vector<int>& eps, const std::optional<Vec>& parent) {
    ++stats_.nodes_visited;
    ConvexProgram prog = assemble_prefix(setup_, eps, std::nullopt, end_, opts_.relax_tail);
    PhaseOneResult r = attempt(prog, eps, std::nullopt);
    if (r.feasible) return r.z;
    bool convex = true;
    for (const auto& c : prog.nonlinear) convex = convex && c.fn->convex();
    if (convex) return std::nullopt;
    // The verdict may come from a local minimum of phase one.
    for (int t = -1; t < opts_.restarts; ++t) {
      if (t < 0 && !parent) continue;
      ++stats_.restarts;
      try {
        r = attempt(prog, eps, t < 0 ? *parent : random_start(prog.dim()));
      } catch (const Error&) {
        // A failed restart adds no evidence either way.
        continue;
      }
      if (r.feasible) {
        ++stats_.recovered;
        return r.z;
      }
    }
    return std::nullopt;
  }

  void descend(std::vector<int>& eps, const std::optional<Vec>& parent) {
    const int N = setup_.horizon;
    const int L = static_cast<int>(eps.size());
    for (int j = 1; j <= setup_.s(); ++j) {
      eps.push_back(j);
      const std::optional<Vec> witness = feasible(eps, parent);
      if (L + 1 == N) ++stats_.leaves_checked;
      if (!witness) {
        stats_.eliminated += scenario_count(N - L - 1, setup_.s());
      } else {
        ++stats_.feasible_prefixes[static_cast<std::size_t>(L)];
        if (L + 1 == N) {
          feasible_.push_back(encode(eps, setup_.s()));
        } else {
          descend(eps, witness);
        }
      }
      eps.pop_back();
    }
    if (opts_.progress && L == 1) {
      *opts_.progress << "  prefix " << eps[0] << " done: " << stats_.nodes_visited << " nodes, " << feasible_.size()
                      << " feasible so far\n";
    }
  }

  const ScenarioSetup& setup_;
  const PruneOptions& opts_;
  EndConstraint end_;
  std::mt19937_64 rng_;
  Vec x_lo_, x_hi_;
  PruneStats stats_;
  std::vector<ScenarioIndex> feasible_;
};

}  // namespace

PrunedTree prune(const ScenarioSetup& setup, const PruneOptions& opts) {
  PrunedTree tree;
  tree.horizon = setup.horizon;
  tree.s = setup.s();
  scenario_count(setup.horizon, setup.s());
  {
    Pruner p(setup, opts, EndConstraint::Terminal);
    tree.feasible = p.run();
    tree.stats = p.stats();
  }
  std::sort(tree.feasible.begin(), tree.feasible.end());
  if (opts.count_without_terminal) {
    Pruner p(setup, opts, EndConstraint::None);
    auto list = p.run();
    std::sort(list.begin(), list.end());
    tree.feasible_without_terminal = std::move(list);
    tree.stats_without_terminal = p.stats();
  }
  return tree;
}

namespace {

nlohmann::json stats_json(const PruneStats& s) {
  return {{"nodes_visited", s.nodes_visited},
          {"leaves_checked", s.leaves_checked},
          {"eliminated", s.eliminated},
          {"restarts", s.restarts},
          {"recovered", s.recovered},
          {"feasible_prefixes", s.feasible_prefixes},
          {"seconds", s.seconds}};
}

PruneStats stats_from(const nlohmann::json& j) {
  PruneStats s;
  s.nodes_visited = j.at("nodes_visited").get<std::uint64_t>();
  s.leaves_checked = j.at("leaves_checked").get<std::uint64_t>();
  s.eliminated = j.at("eliminated").get<std::uint64_t>();
  s.restarts = j.value("restarts", std::uint64_t{0});
  s.recovered = j.value("recovered", std::uint64_t{0});
  s.feasible_prefixes = j.at("feasible_prefixes").get<std::vector<std::uint64_t>>();
  s.seconds = j.at("seconds").get<double>();
  return s;
}

}  // namespace

void save_tree(std::ostream& os, const PrunedTree& tree) {
  nlohmann::json j;
  j["horizon"] = tree.horizon;
  j["s"] = tree.s;
  j["config_hash"] = tree.config_hash;
  j["feasible"] = tree.feasible;
  j["feasible_count"] = tree.feasible.size();
  j["stats"] = stats_json(tree.stats);
  if (tree.feasible_without_terminal) {
    j["feasible_without_terminal"] = *tree.feasible_without_terminal;
    j["feasible_without_terminal_count"] = tree.feasible_without_terminal->size();
    j["stats_without_terminal"] = stats_json(tree.stats_without_terminal);
  }
  os << j.dump(2) << "\n";
}

PrunedTree load_tree(std::istream& is) {
  try {
    const nlohmann::json j = nlohmann::json::parse(is);
    PrunedTree tree;
    tree.horizon = j.at("horizon").get<int>();
    tree.s = j.at("s").get<int>();
    tree.config_hash = j.at("config_hash").get<std::string>();
    tree.feasible = j.at("feasible").get<std::vector<ScenarioIndex>>();
    tree.stats = stats_from(j.at("stats"));
    if (j.contains("feasible_without_terminal")) {
      tree.feasible_without_terminal = j.at("feasible_without_terminal").get<std::vector<ScenarioIndex>>();
      tree.stats_without_terminal = stats_from(j.at("stats_without_terminal"));
    }
    return tree;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, std::string("scenario file: ") + e.what());
  }
}

namespace {

// Runs f(0..count-1) on up to `jobs` threads.
template <class F>
void parallel_for(std::size_t count, int jobs, F&& f) {
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < count; i = next++) f(i);
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

bool certified_convex(const ConvexProgram& prog) {
  for (const auto& c : prog.nonlinear) {
    if (!c.fn->convex()) return false;
  }
  return true;
}

class ScenarioSearch {
 public:
  ScenarioSearch(const ScenarioSetup& setup, const PrunedTree& tree, const Vec& x, int jobs, double tie_tol)
      : setup_(setup), x_(x), jobs_(jobs), tie_tol_(tie_tol) {
    seqs_.reserve(tree.feasible.size());
    for (const ScenarioIndex mu : tree.feasible) seqs_.push_back({decode(mu, setup.horizon, setup.s()), mu});
    std::sort(seqs_.begin(), seqs_.end());
  }

  void exhaustive() {
    std::vector<Node> leaves;
    for (std::size_t i = 0; i < seqs_.size(); ++i) {
      Node nd;
      nd.eps = seqs_[i].first;
      nd.lo = i;
      nd.hi = i + 1;
      leaves.push_back(std::move(nd));
    }
    evaluate(leaves);
    for (Node& nd : leaves) accept_leaf(nd);
  }

  void branch_and_bound() {
    std::vector<int> root;
    descend(root, 0, seqs_.size());
  }

  SolveResult finish() {
    SolveResult res;
    res.bound_solves = bound_solves_;
    res.pruned = pruned_;
    double best = std::numeric_limits<double>::infinity();
    bool numerical = false;
    for (const Leaf& l : leaves_) {
      res.scenarios.push_back(l.value);
      if (l.value.status == SolveStatus::Optimal) best = std::min(best, l.value.value);
      if (l.value.status == SolveStatus::NumericalFailure || l.value.status == SolveStatus::MaxIter) numerical = true;
    }
    if (!std::isfinite(best)) {
      res.status = numerical ? SolveStatus::NumericalFailure : SolveStatus::Infeasible;
      return res;
    }
    const Leaf* win = nullptr;
    const double band = tie_tol_ * std::max(1.0, std::abs(best));
    for (const Leaf& l : leaves_) {
      if (l.value.status == SolveStatus::Optimal && l.value.value <= best + band) {
        if (!win || l.value.mu < win->value.mu) win = &l;
      }
    }
    const SolveOutcome& o = win->outcome;
    const Index n = setup_.model.n();
    const Index m = setup_.model.m();
    const int N = setup_.horizon;
    res.status = SolveStatus::Optimal;
    res.value = o.value;
    res.mu_star = win->value.mu;
    res.x_pred = Eigen::Map<const Mat>(o.z.data(), n, N + 1);
    res.v_pred = Eigen::Map<const Mat>(o.z.data() + (N + 1) * n, m, N);
    res.v0 = res.v_pred.col(0);
    res.u0 = recover_input(setup_.model, setup_.universe.input_box, x_, res.v0);
    res.min_slack = -assemble(setup_, res.mu_star, x_).max_inequality(o.z);
    return res;
  }

 private:
  // A prefix and the range of sorted scenarios below it.
  struct Node {
    std::vector<int> eps;
    std::size_t lo = 0, hi = 0;
    SolveStatus status = SolveStatus::Infeasible;
    double value = 0.0;
    bool solved = false;
    bool bounded = false;  // value is a valid lower bound for the subtree
    SolveOutcome outcome;
  };
  struct Leaf {
    ScenarioValue value;
    SolveOutcome outcome;
  };

  bool full(const Node& nd) const { return static_cast<int>(nd.eps.size()) == setup_.horizon; }

  void evaluate(std::vector<Node>& nodes) {
    parallel_for(nodes.size(), jobs_, [&](std::size_t i) {
      Node& nd = nodes[i];
      const int first = nd.eps[0];
      if (!setup_.zsets[static_cast<std::size_t>(first - 1)].state_set.contains(x_, 1e-9)) {
        nd.status = SolveStatus::Infeasible;
        nd.bounded = true;
        return;
      }
      try {
        const ConvexProgram prog = assemble_prefix(setup_, nd.eps, x_, EndConstraint::Terminal, true);
        // A local solve neither bounds the subtree nor proves it empty.
        if (!full(nd) && !certified_convex(prog)) return;
        nd.solved = true;
        nd.outcome = solve(prog, setup_.solver);
        nd.status = nd.outcome.status;
        nd.value = nd.outcome.value;
        nd.bounded = nd.status == SolveStatus::Optimal || nd.status == SolveStatus::Infeasible;
      } catch (const Error&) {
        nd.solved = true;
        nd.status = SolveStatus::NumericalFailure;
      }
    });
  }

  void accept_leaf(Node& nd) {
    Leaf l;
    l.value.mu = seqs_[nd.lo].second;
    l.value.status = nd.status;
    l.value.value = nd.value;
    if (nd.status == SolveStatus::Optimal) {
      incumbent_ = std::min(incumbent_, nd.value);
      l.outcome = std::move(nd.outcome);
    }
    leaves_.push_back(std::move(l));
  }

  bool dominated(const Node& nd) const {
    if (!nd.bounded) return false;
    if (nd.status == SolveStatus::Infeasible) return true;
    if (!std::isfinite(incumbent_)) return false;
    const double scale = std::max(1.0, std::abs(incumbent_));
    return nd.value > incumbent_ + tie_tol_ * scale + 1e-7 * scale;
  }

  void descend(const std::vector<int>& prefix, std::size_t lo, std::size_t hi) {
    const std::size_t L = prefix.size();
    std::vector<Node> children;
    for (std::size_t i = lo; i < hi;) {
      std::size_t j = i;
      while (j < hi && seqs_[j].first[L] == seqs_[i].first[L]) ++j;
      Node nd;
      nd.eps = prefix;
      nd.eps.push_back(seqs_[i].first[L]);
      nd.lo = i;
      nd.hi = j;
      children.push_back(std::move(nd));
      i = j;
    }
    evaluate(children);
    std::vector<std::size_t> order(children.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    // Most promising subtree first so that the incumbent tightens early.
    auto key = [&](const Node& nd) {
      return nd.status == SolveStatus::Optimal ? nd.value : std::numeric_limits<double>::infinity();
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return key(children[a]) < key(children[b]); });
    for (const std::size_t c : order) {
      Node& nd = children[c];
      if (full(nd)) {
        accept_leaf(nd);
        continue;
      }
      if (nd.solved) ++bound_solves_;
      if (dominated(nd)) {
        pruned_ += nd.hi - nd.lo;
        continue;
      }
      descend(nd.eps, nd.lo, nd.hi);
    }
  }

  const ScenarioSetup& setup_;
  const Vec& x_;
  int jobs_;
  double tie_tol_;
  std::vector<std::pair<std::vector<int>, ScenarioIndex>> seqs_;
  std::vector<Leaf> leaves_;
  double incumbent_ = std::numeric_limits<double>::infinity();
  std::uint64_t bound_solves_ = 0;
  std::uint64_t pruned_ = 0;
};

}  // namespace

SolveResult solve_state(const ScenarioSetup& setup, const PrunedTree& tree, const Vec& x, int jobs, double tie_tol,
                        Search search) {
  if (tree.horizon != setup.horizon || tree.s != setup.s()) {
    throw Error(ErrorCode::Config, "scenario tree does not match the problem");
  }
  if (x.size() != setup.model.n() || !x.allFinite()) throw Error(ErrorCode::Config, "state has the wrong size");
  if (!setup.universe.state_set.contains(x, 1e-9)) throw Error(ErrorCode::StateOutsideX, "state outside X");
  ScenarioSearch s(setup, tree, x, jobs, tie_tol);
  if (search == Search::Exhaustive) {
    s.exhaustive();
  } else {
    s.branch_and_bound();
  }
  return s.finish();
}

}  // namespace cnmpc
