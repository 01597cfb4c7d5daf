// Command-line front end: validate | prune | solve | simulate | sample.
//
// Exit codes: 0 success, 1 validation or configuration failure, 2 infeasible,
// 3 numerical failure.

#include "cnmpc/config.hpp"
#include "cnmpc/simulate.hpp"
#include "cnmpc/transform.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace cnmpc;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kValidation = 1, kInfeasible = 2, kNumerical = 3 };

struct Args {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  int jobs = 1;
  std::string state;
  int steps = -1;
  int grid = 21;
};

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::StateOutsideX: return kInfeasible;
    case ErrorCode::NumericalFailure:
    case ErrorCode::MaxIter:
    case ErrorCode::NoConvergence:
    case ErrorCode::SingularInnerMatrix:
    case ErrorCode::NotFinitelyDetermined:
    case ErrorCode::InconsistentArtificialInput:
    case ErrorCode::InputBoxViolation: return kNumerical;
    default: return kValidation;
  }
}

Vec parse_vector(const std::string& text, Index n) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      vals.push_back(std::stod(item, &pos));
      if (item.find_first_not_of(" \t", pos) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::Config, "bad number '" + item + "' in state");
    }
  }
  if (static_cast<Index>(vals.size()) != n) {
    throw Error(ErrorCode::Config, "state needs " + std::to_string(n) + " comma-separated values");
  }
  return Eigen::Map<Vec>(vals.data(), n);
}

json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::string sequence_text(ScenarioIndex mu, int N, int s) {
  std::string out;
  for (int e : decode(mu, N, s)) out += (out.empty() ? "" : ",") + std::to_string(e);
  return out;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error(ErrorCode::Config, "cannot write " + p.string());
  os << content;
}

std::string fmt(double v, int digits = 17) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string vec_text(const Vec& v) {
  std::string out;
  for (Index i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v(i));
  return out;
}

fs::path tree_path(const Args& a, const RunConfig& cfg) { return fs::path(a.out) / ("scenarios_" + cfg.hash + ".json"); }

void print_stats(const char* label, const PruneStats& s, std::size_t count) {
  std::cout << label << ": " << count << " feasible scenarios, " << s.nodes_visited << " phase-one problems, "
            << s.eliminated << " scenarios eliminated, " << s.restarts << " restarts (" << s.recovered
            << " recovered), " << fmt(s.seconds, 3) << " s\n";
  std::cout << "  feasible prefixes per depth:";
  for (auto c : s.feasible_prefixes) std::cout << ' ' << c;
  std::cout << "\n";
}

PrunedTree run_prune(const Args& a, const Problem& p, bool both) {
  PruneOptions po;
  po.count_without_terminal = both;
  PrunedTree tree = prune(p.setup, po);
  tree.config_hash = p.config.hash;
  fs::create_directories(a.out);
  std::ostringstream os;
  save_tree(os, tree);
  write_file(tree_path(a, p.config), os.str());
  return tree;
}

// Cached by config hash; prunes (with the terminal set only) when missing.
PrunedTree obtain_tree(const Args& a, const Problem& p) {
  const fs::path path = tree_path(a, p.config);
  if (fs::exists(path)) {
    std::ifstream is(path);
    PrunedTree t = load_tree(is);
    if (t.config_hash == p.config.hash && t.horizon == p.setup.horizon && t.s == p.setup.s()) return t;
  }
  std::cerr << "no cached scenario tree for " << p.config.hash << ", pruning\n";
  return run_prune(a, p, false);
}

int cmd_validate(const Args& a) {
  const RunConfig cfg = load_config(a.config, a.seed);
  const ValidationReport rep = validate_config(cfg);
  std::cout << "config " << cfg.name << " (" << cfg.hash << ")\n" << rep.to_text();
  fs::create_directories(a.out);
  json j{{"config_hash", cfg.hash}, {"pass", rep.pass}, {"failures", rep.failures}, {"warnings", rep.warnings}};
  write_file(fs::path(a.out) / ("validate_" + cfg.hash + ".json"), j.dump(2) + "\n");
  return rep.pass ? kOk : kValidation;
}

int cmd_prune(const Args& a) {
  const Problem p = build_problem(load_config(a.config, a.seed));
  const PrunedTree tree = run_prune(a, p, true);
  std::cout << "config " << p.config.name << " (" << p.config.hash << "), horizon " << tree.horizon << ", "
            << tree.s << " partitions\n";
  print_stats("with terminal set", tree.stats, tree.feasible.size());
  if (tree.feasible_without_terminal) {
    print_stats("without terminal set", tree.stats_without_terminal, tree.feasible_without_terminal->size());
  }
  std::ofstream ts(fs::path(a.out) / ("terminal_" + p.config.hash + ".csv"));
  write_terminal_csv(ts, p.setup.terminal.T);
  std::cout << "wrote " << tree_path(a, p.config).string() << "\n";
  return tree.feasible.empty() ? kInfeasible : kOk;
}

int cmd_solve(const Args& a) {
  const Problem p = build_problem(load_config(a.config, a.seed));
  const Vec x = parse_vector(a.state, p.setup.model.n());
  const Vec dx = x - p.x_offset;
  const PrunedTree tree = obtain_tree(a, p);
  SolveResult r;
  json j{{"config_hash", p.config.hash}, {"state", to_json(x)}};
  int code = kOk;
  try {
    r = solve_state(p.setup, tree, dx, a.jobs);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::StateOutsideX) throw;
    r.status = SolveStatus::Infeasible;
  }
  j["status"] = to_string(r.status);
  j["subproblems_solved"] = r.scenarios.size();
  j["bound_solves"] = r.bound_solves;
  j["scenarios_skipped"] = r.pruned;
  if (r.status == SolveStatus::Optimal) {
    const Vec u = r.u0 + p.u_offset;
    j["value"] = r.value;
    j["scenario"] = decode(r.mu_star, tree.horizon, tree.s);
    j["u0"] = to_json(u);
    j["v0"] = to_json(r.v0);
    j["min_slack"] = r.min_slack;
    std::cout << "status optimal\nV " << fmt(r.value) << "\nscenario " << sequence_text(r.mu_star, tree.horizon, tree.s)
              << "\nu0 " << vec_text(u) << "\nv0 " << vec_text(r.v0) << "\nmin_slack " << fmt(r.min_slack) << "\n";
  } else {
    std::cout << "status " << to_string(r.status) << "\n";
    code = r.status == SolveStatus::Infeasible ? kInfeasible : kNumerical;
  }
  fs::create_directories(a.out);
  write_file(fs::path(a.out) / ("solve_" + p.config.hash + ".json"), j.dump(2) + "\n");
  return code;
}

int cmd_simulate(const Args& a) {
  const Problem p = build_problem(load_config(a.config, a.seed));
  const PrunedTree tree = obtain_tree(a, p);
  const ClosedLoop loop(p.setup, tree, a.jobs);
  Vec dx0;
  if (a.state.empty()) {
    dx0 = sample_feasible_state(loop, p.config.seed);
  } else {
    dx0 = parse_vector(a.state, p.setup.model.n()) - p.x_offset;
  }
  SimulationOptions so = p.config.simulation;
  if (a.steps >= 0) so.steps = a.steps;
  const Trajectory t = loop.run(dx0, so);

  fs::create_directories(a.out);
  const std::string stem = "trajectory_" + p.config.hash;
  std::ostringstream csv;
  write_trajectory_csv(csv, t);
  write_file(fs::path(a.out) / (stem + ".csv"), csv.str());
  if (p.shifted) {
    std::ostringstream orig;
    write_trajectory_csv(orig, t, p.x_offset, p.u_offset);
    write_file(fs::path(a.out) / (stem + "_original.csv"), orig.str());
  }
  json j{{"config_hash", p.config.hash},
         {"x0", to_json(dx0 + p.x_offset)},
         {"steps", static_cast<int>(t.records.size()) - 1},
         {"reason", to_string(t.reason)},
         {"message", t.message}};
  write_file(fs::path(a.out) / (stem + ".json"), j.dump(2) + "\n");
  std::cout << "x0 " << vec_text(dx0 + p.x_offset) << "\n"
            << t.records.size() << " records, stopped: " << to_string(t.reason)
            << (t.message.empty() ? "" : " (" + t.message + ")") << "\n";
  if (!t.records.empty()) {
    std::cout << "final |x - x_eq|_inf " << fmt(t.records.back().x.lpNorm<Eigen::Infinity>()) << "\n";
  }
  switch (t.reason) {
    case StopReason::Infeasible: return kInfeasible;
    case StopReason::Numerical:
    case StopReason::Budget: return kNumerical;
    default: return kOk;
  }
}

int cmd_sample(const Args& a) {
  const Problem p = build_problem(load_config(a.config, a.seed));
  const PrunedTree tree = obtain_tree(a, p);
  const ScenarioSetup& S = p.setup;
  const Index n = S.model.n();
  const Index m = S.model.m();
  if (a.grid < 2) throw Error(ErrorCode::Config, "--grid needs at least 2 points per axis");
  const double total = std::pow(static_cast<double>(a.grid), static_cast<double>(n));
  if (total > 1e6) throw Error(ErrorCode::Config, "grid too large for this state dimension");
  const std::size_t count = static_cast<std::size_t>(total);
  Vec lo(n), hi(n);
  for (Index i = 0; i < n; ++i) std::tie(lo(i), hi(i)) = range_of(S.universe.state_set, Vec::Unit(n, i));

  struct Row {
    Vec x;
    SolveResult r;
    bool feasible = false;
  };
  std::vector<Row> rows(count);
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(count);
  auto worker = [&]() {
    for (std::size_t idx = next++; idx < count; idx = next++) {
      Vec x(n);
      std::size_t rest = idx;
      for (Index i = 0; i < n; ++i) {
        const std::size_t c = rest % static_cast<std::size_t>(a.grid);
        rest /= static_cast<std::size_t>(a.grid);
        x(i) = lo(i) + (hi(i) - lo(i)) * static_cast<double>(c) / (a.grid - 1);
      }
      rows[idx].x = x;
      if (!S.universe.state_set.contains(x, 1e-9)) continue;
      try {
        rows[idx].r = solve_state(S, tree, x, 1);
        rows[idx].feasible = rows[idx].r.status == SolveStatus::Optimal;
      } catch (const Error& e) {
        errors[idx] = e.what();
      }
    }
  };
  const int threads = std::max(1, a.jobs);
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ostringstream os;
  for (Index i = 1; i <= n; ++i) os << "x_" << i << ',';
  os << 'V';
  for (Index i = 1; i <= m; ++i) os << ",u_" << i;
  os << ",mu_star,scenario,feasible\n";
  std::size_t feasible = 0, failed = 0;
  for (std::size_t idx = 0; idx < count; ++idx) {
    const Row& row = rows[idx];
    os << vec_text(row.x + p.x_offset) << ',';
    if (row.feasible) {
      ++feasible;
      os << fmt(row.r.value);
      for (Index i = 0; i < m; ++i) os << ',' << fmt(row.r.u0(i) + p.u_offset(i));
      os << ',' << row.r.mu_star << ",\"" << sequence_text(row.r.mu_star, tree.horizon, tree.s) << '"';
      os << ",1\n";
    } else {
      if (!errors[idx].empty() || row.r.status == SolveStatus::NumericalFailure) ++failed;
      os << "nan";
      for (Index i = 0; i < m; ++i) os << ",nan";
      os << ",,,0\n";
    }
  }
  fs::create_directories(a.out);
  const fs::path path = fs::path(a.out) / ("sample_" + p.config.hash + ".csv");
  write_file(path, os.str());
  std::cout << count << " grid points, " << feasible << " feasible, " << failed << " numerical failures\nwrote "
            << path.string() << "\n";
  return failed ? kNumerical : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact NMPC for input-affine systems by convex scenario decomposition"};
  app.require_subcommand(1);
  Args a;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", a.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", a.seed, "overrides the configured seed");
    sub->add_option("--out", a.out, "output directory")->capture_default_str();
    sub->add_option("--jobs", a.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  };
  CLI::App* validate = app.add_subcommand("validate", "check partition certificates and coverage");
  CLI::App* prune_cmd = app.add_subcommand("prune", "offline scenario pruning");
  CLI::App* solve_cmd = app.add_subcommand("solve", "optimal input at one state");
  CLI::App* simulate = app.add_subcommand("simulate", "closed-loop simulation");
  CLI::App* sample = app.add_subcommand("sample", "value function on a state grid");
  for (CLI::App* sub : {validate, prune_cmd, solve_cmd, simulate, sample}) common(sub);
  solve_cmd->add_option("--state,--x0", a.state, "comma-separated state")->required();
  simulate->add_option("--x0,--state", a.state, "comma-separated initial state (random feasible when omitted)");
  simulate->add_option("--steps", a.steps, "number of closed-loop steps");
  sample->add_option("--grid", a.grid, "points per axis")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (*validate) return cmd_validate(a);
    if (*prune_cmd) return cmd_prune(a);
    if (*solve_cmd) return cmd_solve(a);
    if (*simulate) return cmd_simulate(a);
    if (*sample) return cmd_sample(a);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}
