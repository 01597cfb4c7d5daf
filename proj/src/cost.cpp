#include "cnmpc/cost.hpp"

#include "cnmpc/transform.hpp"

namespace cnmpc {

void QuadraticStageCost::check() const {
  if (Q.rows() != Q.cols() || R.rows() != R.cols()) throw Error(ErrorCode::Config, "Q and R must be square");
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 || (R - R.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorCode::Config, "Q and R must be symmetric");
  }
  if (Eigen::SelfAdjointEigenSolver<Mat>(Q).eigenvalues().minCoeff() < -1e-10) {
    throw Error(ErrorCode::Config, "Q is not positive semidefinite");
  }
  if (Eigen::SelfAdjointEigenSolver<Mat>(R).eigenvalues().minCoeff() < 1e-10) {
    throw Error(ErrorCode::Config, "R is not positive definite");
  }
}

double stage_cost_v(const QuadraticStageCost& cost, const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& v) {
  return x.dot(cost.Q * x) + v.dot(cost.R * v);
}

double stage_cost_u(const SystemModel& model, const QuadraticStageCost& cost, const Eigen::Ref<const Vec>& x,
                    const Eigen::Ref<const Vec>& u) {
  return stage_cost_v(cost, x, forward_input(model, x, u));
}

}  // namespace cnmpc
