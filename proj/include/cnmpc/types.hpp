#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace cnmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class ErrorCode {
  InvalidPartition,
  UncertifiedPartition,
  NotEquilibrium,
  UnsupportedAtomForShift,
  InconsistentArtificialInput,
  InputBoxViolation,
  NoConvergence,
  SingularInnerMatrix,
  NotFinitelyDetermined,
  InteriorityViolated,
  OutOfRange,
  StateOutsideX,
  NumericalFailure,
  MaxIter,
  Unsupported,
  Config,
};

const char* to_string(ErrorCode code);

/// All library failures surface as this exception; `code()` identifies the
/// contract that was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cnmpc
