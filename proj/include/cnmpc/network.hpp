#pragma once

#include "cnmpc/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cnmpc {

struct NetworkOptions {
  Index n = 15;
  /// Directed edges (from, to), 0-based; they fix the sparsity of A.
  std::vector<std::pair<Index, Index>> edges;
  double spectral_radius = 0.95;
  std::uint64_t seed = 1;
  /// x_eq lies along (I - A)^-1 b with infinity norm equal to state_limit
  /// times a factor drawn uniformly from [scale_min, scale_max].
  double state_limit = 10.0;
  double scale_min = 0.2;
  double scale_max = 0.6;
  double input_limit = 2.0;
  int max_attempts = 1000;
};

/// x+ = A x + b (c^T x) u with its equilibrium (x_eq, u_eq).
struct BilinearNetwork {
  Mat A;
  Vec b;
  Vec c;
  Vec x_eq;
  double u_eq = 0.0;
  int attempts = 0;
};

/// Reads "from to" pairs (0-based, '#' comments) from a text file.
std::vector<std::pair<Index, Index>> read_edge_list(const std::string& path);

/// Seeded instance: edge weights uniform in [-1, 1], A rescaled to the
/// requested spectral radius, b and c random unit vectors. Redraws until
/// |u_eq| <= input_limit. Throws Config when no draw qualifies.
BilinearNetwork generate_network(const NetworkOptions& opts);

}  // namespace cnmpc
