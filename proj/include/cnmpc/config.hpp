#pragma once

#include "cnmpc/model.hpp"
#include "cnmpc/network.hpp"
#include "cnmpc/scenario.hpp"
#include "cnmpc/simulate.hpp"
#include "cnmpc/terminal.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace cnmpc {

/// 64-bit FNV-1a of the canonical (sorted, compact) JSON text, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

/// Parsed configuration. Partitions are already intersected with the state
/// set; nothing is certified yet.
struct RunConfig {
  nlohmann::json raw;
  std::string hash;
  std::string name;
  SystemModel model;
  ConstraintUniverse universe;
  QuadraticStageCost cost;
  int horizon = 1;
  std::optional<int> terminal_partition;  // empty: the partition holding the origin
  TerminalOptions terminal;
  SolverOptions solver;
  SimulationOptions simulation;
  std::uint64_t seed = 1;
  std::optional<Vec> x_eq;
  std::optional<Vec> u_eq;
  std::optional<BilinearNetwork> network;
};

/// Validates the schema; throws Config with the offending key. Relative file
/// paths resolve against `base_dir`.
RunConfig parse_config(const nlohmann::json& j, const std::string& base_dir = ".");
/// Reads the file and applies an optional seed override before hashing.
RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed = std::nullopt);

/// A ready-to-solve problem: certified, shifted when an equilibrium is given,
/// with terminal ingredients.
struct Problem {
  RunConfig config;
  ValidationReport validation;
  SystemModel original_model;
  ConstraintUniverse original_universe;
  bool shifted = false;
  Vec x_offset;
  Vec u_offset;
  ScenarioSetup setup;
};

/// Throws UncertifiedPartition when validation fails.
Problem build_problem(const RunConfig& cfg);

/// Validation of the (possibly shifted) universe without building anything else.
ValidationReport validate_config(const RunConfig& cfg);

}  // namespace cnmpc
