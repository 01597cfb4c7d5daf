#pragma once

#include "cnmpc/model.hpp"

namespace cnmpc {

/// l(x, v) = x^T Q x + v^T R v
struct QuadraticStageCost {
  Mat Q;
  Mat R;

  /// Q PSD and R PD (eigenvalue tolerance 1e-10); throws Config.
  void check() const;
};

double stage_cost_v(const QuadraticStageCost& cost, const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& v);

/// Cost pulled back to the true input, l(x, G(x) u).
double stage_cost_u(const SystemModel& model, const QuadraticStageCost& cost, const Eigen::Ref<const Vec>& x,
                    const Eigen::Ref<const Vec>& u);

}  // namespace cnmpc
