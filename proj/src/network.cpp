#include "cnmpc/network.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace cnmpc {

std::vector<std::pair<Index, Index>> read_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Config, "cannot open edge list " + path);
  std::vector<std::pair<Index, Index>> edges;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Index a, b;
    std::string rest;
    if (!(ls >> a >> b) || (ls >> rest))
      throw Error(ErrorCode::Config, path + ":" + std::to_string(lineno) + ": expected two node indices");
    edges.emplace_back(a, b);
  }
  return edges;
}

BilinearNetwork generate_network(const NetworkOptions& opts) {
  const Index n = opts.n;
  if (n < 1 || opts.edges.empty()) throw Error(ErrorCode::Config, "network needs n >= 1 and at least one edge");
  for (const auto& [a, b] : opts.edges) {
    if (a < 0 || b < 0 || a >= n || b >= n) throw Error(ErrorCode::Config, "edge index outside 0..n-1");
  }
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> weight(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> scale(opts.scale_min, opts.scale_max);
  auto unit = [&]() {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal(rng);
    return Vec(v / v.norm());
  };
  for (int attempt = 1; attempt <= opts.max_attempts; ++attempt) {
    BilinearNetwork net;
    net.attempts = attempt;
    net.A = Mat::Zero(n, n);
    for (const auto& [from, to] : opts.edges) net.A(to, from) = weight(rng);
    const double rho = Eigen::EigenSolver<Mat>(net.A, false).eigenvalues().cwiseAbs().maxCoeff();
    net.b = unit();
    net.c = unit();
    const double alpha = scale(rng);
    if (rho < 1e-12) continue;
    net.A *= opts.spectral_radius / rho;
    // x = A x + b (c^T x) u holds for any multiple of w = (I - A)^-1 b with u = 1 / (c^T w).
    const Vec w = (Mat::Identity(n, n) - net.A).partialPivLu().solve(net.b);
    const double cw = net.c.dot(w);
    if (std::abs(cw) < 1e-12) continue;
    net.u_eq = 1.0 / cw;
    net.x_eq = alpha * opts.state_limit / w.lpNorm<Eigen::Infinity>() * w;
    if (std::abs(net.u_eq) > opts.input_limit) continue;
    return net;
  }
  throw Error(ErrorCode::Config, "no network draw had an equilibrium input inside the limit");
}

}  // namespace cnmpc
