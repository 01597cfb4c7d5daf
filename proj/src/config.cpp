#include "cnmpc/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace cnmpc {

using nlohmann::json;

std::string config_hash(const json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::Config, where + ": " + what);
}

// Numbers may also be written as products and quotients of literals and "pi",
// e.g. "4/3" or "-3*pi/8".
double parse_scalar(const json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) fail(where, "expected a number");
  std::string s = j.get<std::string>();
  s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
  double sign = 1.0;
  std::size_t pos = 0;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    sign = s[0] == '-' ? -1.0 : 1.0;
    pos = 1;
  }
  double value = 1.0;
  char op = '*';
  while (pos <= s.size()) {
    const std::size_t end = s.find_first_of("*/", pos);
    const std::string tok = s.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    double v;
    if (tok == "pi") {
      v = std::numbers::pi;
    } else {
      try {
        std::size_t used = 0;
        v = std::stod(tok, &used);
        if (used != tok.size()) fail(where, "cannot parse \"" + s + "\"");
      } catch (const std::logic_error&) {
        fail(where, "cannot parse \"" + s + "\"");
      }
    }
    value = op == '*' ? value * v : value / v;
    if (end == std::string::npos) break;
    op = s[end];
    pos = end + 1;
  }
  return sign * value;
}

Vec parse_vec(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array");
  Vec v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = parse_scalar(j[i], where);
  return v;
}

Mat parse_mat(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) fail(where, "expected a non-empty array of rows");
  const std::size_t cols = j[0].size();
  Mat M(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) fail(where, "ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) M(static_cast<Index>(r), static_cast<Index>(c)) = parse_scalar(j[r][c], where);
  }
  return M;
}

// A number means that multiple of the identity.
Mat parse_weight(const json& j, Index dim, const std::string& where) {
  if (j.is_number() || j.is_string()) return parse_scalar(j, where) * Mat::Identity(dim, dim);
  Mat M = parse_mat(j, where);
  if (M.rows() != dim || M.cols() != dim) fail(where, "wrong dimension");
  return M;
}

const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) fail(where, std::string("missing \"") + key + "\"");
  return j.at(key);
}

NonlinearityAtom parse_atom(const json& j, Index n, const std::string& where) {
  const std::string type = need(j, "type", where).get<std::string>();
  if (type == "affine") {
    AffineAtom a{parse_vec(need(j, "c", where), where), j.contains("d") ? parse_scalar(j["d"], where) : 0.0};
    if (a.c.size() != n) fail(where, "c has the wrong length");
    return a;
  }
  if (type == "quadratic") {
    QuadraticAtom q{parse_mat(need(j, "H", where), where),
                    j.contains("c") ? parse_vec(j["c"], where) : Vec::Zero(n),
                    j.contains("d") ? parse_scalar(j["d"], where) : 0.0};
    if (q.H.rows() != n || q.H.cols() != n || q.c.size() != n) fail(where, "wrong dimension");
    return q;
  }
  if (type == "sinusoid") {
    SinusoidAtom s{parse_scalar(need(j, "a", where), where), parse_vec(need(j, "w", where), where),
                   j.contains("phi") ? parse_scalar(j["phi"], where) : 0.0};
    if (s.w.size() != n) fail(where, "w has the wrong length");
    return s;
  }
  fail(where, "unknown atom type \"" + type + "\"");
}

Polyhedron parse_polyhedron(const json& j, Index n, const std::string& where) {
  if (j.contains("inf_norm")) {
    const double r = parse_scalar(j["inf_norm"], where);
    return Polyhedron::box(Vec::Constant(n, -r), Vec::Constant(n, r));
  }
  if (j.contains("lower") || j.contains("upper")) {
    const Vec lo = parse_vec(need(j, "lower", where), where);
    const Vec hi = parse_vec(need(j, "upper", where), where);
    if (lo.size() != n || hi.size() != n) fail(where, "bounds have the wrong length");
    return Polyhedron::box(lo, hi);
  }
  Mat F = parse_mat(need(j, "F", where), where);
  Vec f = parse_vec(need(j, "f", where), where);
  if (F.cols() != n || F.rows() != f.size()) fail(where, "F and f do not match");
  return Polyhedron(F, f);
}

void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& item : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return item.key() == k; })) {
      fail(where, "unknown key \"" + item.key() + "\"");
    }
  }
}

std::uint64_t get_seed(const json& j) {
  if (!j.contains("seed")) return 1;
  if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) fail("seed", "expected an integer");
  return j["seed"].get<std::uint64_t>();
}

}  // namespace

RunConfig parse_config(const json& j, const std::string& base_dir) {
  if (!j.is_object()) fail("config", "top level must be an object");
  allow_keys(j,
             {"name", "seed", "system", "network", "state_set", "input_box", "partitions", "curvature_policy",
              "coverage_pitch", "cost", "horizon", "terminal", "solver", "simulation", "equilibrium"},
             "config");
  if (j.contains("system") == j.contains("network")) fail("config", "give exactly one of \"system\" and \"network\"");
  RunConfig cfg;
  cfg.raw = j;
  cfg.hash = config_hash(j);
  cfg.name = j.value("name", "unnamed");
  cfg.seed = get_seed(j);

  // System: explicit matrices or a generated network.
  if (j.contains("network")) {
    const json& nj = j["network"];
    allow_keys(nj, {"n", "edges_file", "spectral_radius", "scale", "state_limit", "input_limit"}, "network");
    NetworkOptions no;
    no.n = nj.value("n", 15);
    std::filesystem::path file = need(nj, "edges_file", "network").get<std::string>();
    if (file.is_relative()) file = std::filesystem::path(base_dir) / file;
    no.edges = read_edge_list(file.string());
    if (nj.contains("spectral_radius")) no.spectral_radius = parse_scalar(nj["spectral_radius"], "network.spectral_radius");
    if (nj.contains("scale")) {
      const Vec sc = parse_vec(nj["scale"], "network.scale");
      if (sc.size() != 2) fail("network.scale", "expected [min, max]");
      no.scale_min = sc(0);
      no.scale_max = sc(1);
    }
    no.seed = cfg.seed;
    if (nj.contains("state_limit")) no.state_limit = parse_scalar(nj["state_limit"], "network.state_limit");
    if (nj.contains("input_limit")) no.input_limit = parse_scalar(nj["input_limit"], "network.input_limit");
    cfg.network = generate_network(no);
    cfg.model.A = cfg.network->A;
    cfg.model.B = cfg.network->b;
    cfg.model.g = {AffineAtom{cfg.network->c, 0.0}};
    cfg.x_eq = cfg.network->x_eq;
    cfg.u_eq = Vec::Constant(1, cfg.network->u_eq);
  } else {
    const json& sj = need(j, "system", "config");
    allow_keys(sj, {"A", "B", "g"}, "system");
    cfg.model.A = parse_mat(need(sj, "A", "system"), "system.A");
    cfg.model.B = parse_mat(need(sj, "B", "system"), "system.B");
    const json& gj = need(sj, "g", "system");
    if (!gj.is_array()) fail("system.g", "expected an array of atoms");
    for (std::size_t i = 0; i < gj.size(); ++i) {
      cfg.model.g.push_back(parse_atom(gj[i], cfg.model.A.rows(), "system.g[" + std::to_string(i) + "]"));
    }
  }
  cfg.model.check();
  const Index n = cfg.model.n();
  const Index m = cfg.model.m();

  cfg.universe.state_set = parse_polyhedron(need(j, "state_set", "config"), n, "state_set");
  if (!is_bounded(cfg.universe.state_set) || is_empty(cfg.universe.state_set)) {
    fail("state_set", "must be bounded and nonempty");
  }
  const json& ij = need(j, "input_box", "config");
  if (ij.contains("inf_norm")) {
    const double r = parse_scalar(ij["inf_norm"], "input_box");
    cfg.universe.input_box = {Vec::Constant(m, -r), Vec::Constant(m, r)};
  } else {
    cfg.universe.input_box = {parse_vec(need(ij, "lower", "input_box"), "input_box.lower"),
                              parse_vec(need(ij, "upper", "input_box"), "input_box.upper")};
  }
  if (cfg.universe.input_box.lower.size() != m || cfg.universe.input_box.upper.size() != m) {
    fail("input_box", "bounds must have m entries");
  }
  if ((cfg.universe.input_box.lower.array() > cfg.universe.input_box.upper.array()).any()) {
    fail("input_box", "lower bound above upper bound");
  }

  const json& pj = need(j, "partitions", "config");
  if (pj.is_string()) {
    if (pj.get<std::string>() != "gain_sign" || m != 1 || !is_affine(cfg.model.g[0])) {
      fail("partitions", "\"gain_sign\" needs a single affine gain");
    }
    const auto& a = std::get<AffineAtom>(cfg.model.g[0]);
    for (double sgn : {1.0, -1.0}) {
      Partition p;
      p.index = static_cast<int>(cfg.universe.partitions.size()) + 1;
      p.set = remove_redundant(
          cfg.universe.state_set.intersect(Polyhedron((sgn * a.c.transpose()).eval(), Vec::Constant(1, -sgn * a.d))));
      cfg.universe.partitions.push_back(std::move(p));
    }
  } else {
    if (!pj.is_array() || pj.empty()) fail("partitions", "expected a non-empty array");
    for (std::size_t k = 0; k < pj.size(); ++k) {
      const std::string where = "partitions[" + std::to_string(k) + "]";
      Partition p;
      p.index = static_cast<int>(k) + 1;
      p.set = remove_redundant(cfg.universe.state_set.intersect(parse_polyhedron(pj[k], n, where)));
      if (pj[k].contains("sign_case")) {
        const json& sc = pj[k]["sign_case"];
        if (!sc.is_array() || static_cast<Index>(sc.size()) != m) fail(where, "sign_case needs m entries");
        for (const json& e : sc) {
          if (e.is_null()) {
            p.declared.push_back(std::nullopt);
            continue;
          }
          const auto c = sign_case_from_string(e.get<std::string>());
          if (!c) fail(where, "unknown sign case \"" + e.get<std::string>() + "\"");
          p.declared.push_back(c);
        }
      }
      cfg.universe.partitions.push_back(std::move(p));
    }
  }
  const std::string policy = j.value("curvature_policy", "strict");
  if (policy == "strict") {
    cfg.universe.policy = CurvaturePolicy::Strict;
  } else if (policy == "sign_only") {
    cfg.universe.policy = CurvaturePolicy::SignOnly;
  } else {
    fail("curvature_policy", "expected \"strict\" or \"sign_only\"");
  }
  if (j.contains("coverage_pitch")) cfg.universe.grid_pitch_fraction = parse_scalar(j["coverage_pitch"], "coverage_pitch");

  const json& cj = need(j, "cost", "config");
  allow_keys(cj, {"Q", "R"}, "cost");
  cfg.cost.Q = parse_weight(need(cj, "Q", "cost"), n, "cost.Q");
  cfg.cost.R = parse_weight(need(cj, "R", "cost"), m, "cost.R");
  cfg.cost.check();
  cfg.horizon = need(j, "horizon", "config").get<int>();
  if (cfg.horizon < 1) fail("horizon", "must be positive");

  if (j.contains("terminal")) {
    const json& tj = j["terminal"];
    allow_keys(tj, {"partition", "directions", "k_max", "redundancy_tol"}, "terminal");
    if (tj.contains("partition") && !(tj["partition"].is_string() && tj["partition"] == "auto")) {
      cfg.terminal_partition = tj["partition"].get<int>();
    }
    cfg.terminal.directions = tj.value("directions", cfg.terminal.directions);
    cfg.terminal.k_max = tj.value("k_max", cfg.terminal.k_max);
    cfg.terminal.redundancy_tol = tj.value("redundancy_tol", cfg.terminal.redundancy_tol);
  }
  if (j.contains("solver")) {
    const json& so = j["solver"];
    allow_keys(so,
               {"stationarity_tol", "primal_tol", "mu_tol", "accept_tol", "max_iter", "infeasibility_threshold"},
               "solver");
    cfg.solver.stationarity_tol = so.value("stationarity_tol", cfg.solver.stationarity_tol);
    cfg.solver.primal_tol = so.value("primal_tol", cfg.solver.primal_tol);
    cfg.solver.mu_tol = so.value("mu_tol", cfg.solver.mu_tol);
    cfg.solver.accept_tol = so.value("accept_tol", cfg.solver.accept_tol);
    cfg.solver.max_iter = so.value("max_iter", cfg.solver.max_iter);
    cfg.solver.infeasibility_threshold = so.value("infeasibility_threshold", cfg.solver.infeasibility_threshold);
  }
  if (j.contains("simulation")) {
    const json& sj = j["simulation"];
    allow_keys(sj, {"steps", "stop_tol", "step_budget_seconds"}, "simulation");
    cfg.simulation.steps = sj.value("steps", cfg.simulation.steps);
    cfg.simulation.stop_tol = sj.value("stop_tol", cfg.simulation.stop_tol);
    cfg.simulation.step_budget_seconds = sj.value("step_budget_seconds", cfg.simulation.step_budget_seconds);
  }
  if (j.contains("equilibrium")) {
    if (cfg.network) fail("equilibrium", "generated networks compute their own equilibrium");
    cfg.x_eq = parse_vec(need(j["equilibrium"], "x", "equilibrium"), "equilibrium.x");
    cfg.u_eq = parse_vec(need(j["equilibrium"], "u", "equilibrium"), "equilibrium.u");
    if (cfg.x_eq->size() != n || cfg.u_eq->size() != m) fail("equilibrium", "wrong dimension");
  }
  return cfg;
}

RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Config, "cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, path + ": " + e.what());
  }
  if (seed) j["seed"] = *seed;
  const std::string base = std::filesystem::path(path).parent_path().string();
  try {
    return parse_config(j, base.empty() ? "." : base);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, path + ": " + e.what());
  }
}

namespace {

struct Working {
  SystemModel model;
  ConstraintUniverse universe;
  bool shifted = false;
};

Working working_problem(const RunConfig& cfg) {
  Working w{cfg.model, cfg.universe, false};
  if (cfg.x_eq) {
    ShiftedProblem sp = shift_to_equilibrium(cfg.model, cfg.universe, *cfg.x_eq, *cfg.u_eq);
    w.model = std::move(sp.model);
    w.universe = std::move(sp.universe);
    for (Partition& p : w.universe.partitions) {
      p.sign_case.clear();
      p.curvature_ok.clear();
    }
    w.shifted = true;
  }
  return w;
}

}  // namespace

ValidationReport validate_config(const RunConfig& cfg) {
  ValidationReport report;
  Working w;
  try {
    w = working_problem(cfg);
  } catch (const Error& e) {
    report.pass = false;
    report.failures.push_back(e.what());
    return report;
  }
  report = validate_universe(w.model, w.universe);
  if (cfg.x_eq) {
    if (!cfg.universe.state_set.contains(*cfg.x_eq)) {
      report.warnings.push_back("equilibrium state lies outside the state set");
    }
    if (!cfg.universe.input_box.contains(*cfg.u_eq)) {
      report.warnings.push_back("equilibrium input lies outside the input box");
    }
  }
  return report;
}

Problem build_problem(const RunConfig& cfg) {
  Problem p;
  p.config = cfg;
  p.original_model = cfg.model;
  p.original_universe = cfg.universe;
  Working w = working_problem(cfg);
  p.shifted = w.shifted;
  p.x_offset = cfg.x_eq ? *cfg.x_eq : Vec::Zero(cfg.model.n());
  p.u_offset = cfg.u_eq ? *cfg.u_eq : Vec::Zero(cfg.model.m());
  p.validation = validate_universe(w.model, w.universe);
  ConstraintUniverse certified = certify_universe(w.model, w.universe);

  int tp = 0;
  if (cfg.terminal_partition) {
    tp = *cfg.terminal_partition;
  } else {
    const Vec origin = Vec::Zero(w.model.n());
    for (const Partition& part : certified.partitions) {
      if (part.set.max_violation(origin) < -cfg.terminal.zero_tol) {
        tp = part.index;
        break;
      }
    }
    if (tp == 0) throw Error(ErrorCode::InteriorityViolated, "no partition holds the origin in its interior");
  }
  TerminalIngredients term = build_terminal(w.model, certified, cfg.cost, tp, cfg.terminal);
  p.setup = make_setup(w.model, std::move(certified), cfg.cost, std::move(term), cfg.horizon, cfg.solver);
  return p;
}

}  // namespace cnmpc
