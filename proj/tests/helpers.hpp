#pragma once

#include "cnmpc/config.hpp"

#include <cmath>
#include <algorithm>
#include <random>
#include <vector>
#include <string>

namespace testing {

inline std::string source_path(const std::string& rel) { return std::string(CNMPC_SOURCE_DIR) + "/" + rel; }

// Seeded toy system with affine gains and two partitions split by the sign of
// the first gain: n, m in {1, 2}, state box [-2, 2]^n, input box [-1, 1]^m.
// Every gain is positive at the origin so the terminal partition is X_1.
inline nlohmann::json toy_config(std::uint64_t seed, int n, int m, int horizon) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  nlohmann::json A = nlohmann::json::array(), B = nlohmann::json::array(), g = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    nlohmann::json row = nlohmann::json::array(), brow = nlohmann::json::array();
    for (int j = 0; j < n; ++j) row.push_back((i == j ? 1.0 : 0.0) + 0.25 * U(rng));
    for (int j = 0; j < m; ++j) brow.push_back(0.5 * U(rng) + (i == j ? 0.8 : 0.0));
    A.push_back(row);
    B.push_back(brow);
  }
  std::vector<std::vector<double>> c(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(n)));
  for (int j = 0; j < m; ++j) {
    nlohmann::json cj = nlohmann::json::array();
    double l1 = 0.0;
    for (int i = 0; i < n; ++i) {
      double v = 0.6 * U(rng);
      if (i == 0 && std::abs(v) < 0.3) v += v < 0 ? -0.3 : 0.3;
      c[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = v;
      l1 += std::abs(v);
      cj.push_back(v);
    }
    // The first gain changes sign inside X (|c_1| >= 0.3 on x_1 while
    // d < 0.6); the others keep a positive sign on all of X.
    const double d = j == 0 ? 0.2 + 0.35 * (U(rng) + 1.0) / 2.0 : 2.0 * l1 + 0.2 + 0.3 * (U(rng) + 1.0) / 2.0;
    g.push_back({{"type", "affine"}, {"c", cj}, {"d", d}});
  }
  const auto& c0 = c[0];
  const double d0 = g[0]["d"].get<double>();
  nlohmann::json up = nlohmann::json::array(), down = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    up.push_back(-c0[static_cast<std::size_t>(i)]);
    down.push_back(c0[static_cast<std::size_t>(i)]);
  }
  // X_1 = {g_1 >= 0}, X_2 = {g_1 <= 0}.
  nlohmann::json parts = nlohmann::json::array();
  parts.push_back({{"F", nlohmann::json::array({up})}, {"f", {d0}}});
  parts.push_back({{"F", nlohmann::json::array({down})}, {"f", {-d0}}});
  return {{"name", "toy"},
          {"system", {{"A", A}, {"B", B}, {"g", g}}},
          {"state_set", {{"inf_norm", 2}}},
          {"input_box", {{"inf_norm", 1}}},
          {"partitions", parts},
          {"cost", {{"Q", 1.0}, {"R", 0.5}}},
          {"horizon", horizon},
          {"terminal", {{"partition", 1}}}};
}

struct GridOptimum {
  bool found = false;
  double value = 0.0;
  std::vector<cnmpc::Vec> u;  // u(0..N-1)
};

// Global minimum over true input sequences by a dense grid on U^N followed by
// zoomed grids around the incumbent. Feasibility: x(k) in X for k < N,
// x(N) in T, all with margin `tol`.
inline GridOptimum grid_optimum(const cnmpc::ScenarioSetup& S, const cnmpc::Vec& x0, double tol = 1e-9) {
  using cnmpc::Index;
  using cnmpc::Vec;
  const Index m = S.model.m();
  const int N = S.horizon;
  const int d = static_cast<int>(m) * N;
  const Vec& lo = S.universe.input_box.lower;
  const Vec& hi = S.universe.input_box.upper;
  auto evaluate = [&](const Vec& w, double& value) {
    Vec x = x0;
    value = 0.0;
    for (int k = 0; k < N; ++k) {
      if (S.universe.state_set.max_violation(x) > tol) return false;
      const Vec v = cnmpc::eval_g(S.model, x).cwiseProduct(w.segment(k * m, m));
      value += x.dot(S.cost.Q * x) + v.dot(S.cost.R * v);
      x = S.model.A * x + S.model.B * v;
    }
    if (S.terminal.T.max_violation(x) > tol) return false;
    value += x.dot(S.terminal.P * x);
    return true;
  };
  GridOptimum best;
  Vec best_w;
  auto scan = [&](const Vec& center, const Vec& half, int per_axis) {
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    Vec w(d);
    while (true) {
      bool inside = true;
      for (int i = 0; i < d; ++i) {
        const Index c = i % m;
        const double t = per_axis == 1 ? 0.0 : -1.0 + 2.0 * idx[static_cast<std::size_t>(i)] / (per_axis - 1);
        w(i) = center(i) + t * half(i);
        if (w(i) < lo(c) - 1e-15 || w(i) > hi(c) + 1e-15) inside = false;
        w(i) = std::clamp(w(i), lo(c), hi(c));
      }
      double value = 0.0;
      if (inside && evaluate(w, value) && (!best.found || value < best.value)) {
        best.found = true;
        best.value = value;
        best_w = w;
      }
      int pos = 0;
      while (pos < d && ++idx[static_cast<std::size_t>(pos)] == per_axis) idx[static_cast<std::size_t>(pos++)] = 0;
      if (pos == d) break;
    }
  };
  Vec center(d), half(d);
  for (int i = 0; i < d; ++i) {
    center(i) = 0.5 * (lo(i % m) + hi(i % m));
    half(i) = 0.5 * (hi(i % m) - lo(i % m));
  }
  const int coarse = std::max(5, static_cast<int>(std::pow(4e5, 1.0 / d)));
  scan(center, half, coarse | 1);
  if (!best.found) return best;
  half *= 2.0 / (coarse - 1);
  const int fine = std::max(5, static_cast<int>(std::pow(6e4, 1.0 / d))) | 1;
  for (int round = 0; round < 40; ++round) {
    scan(best_w, half, fine);
    half *= 0.6;
  }
  for (int k = 0; k < N; ++k) best.u.push_back(best_w.segment(k * m, m));
  return best;
}

}  // namespace testing
