#include "cnmpc/transform.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cnmpc {

IndexSplit split_indices(const SystemModel& model, const Eigen::Ref<const Vec>& x, double zero_tol) {
  IndexSplit out;
  out.zero_tol = zero_tol;
  const Vec g = eval_g(model, x);
  for (Index i = 0; i < g.size(); ++i) {
    (std::abs(g(i)) <= zero_tol ? out.S : out.N).push_back(i);
  }
  return out;
}

Vec ZGenerator::gradient(const Eigen::Ref<const Vec>& x) const {
  Vec out(x.size() + 1);
  out.head(x.size()) = alpha * atom_gradient(atom, x);
  out(x.size()) = beta;
  return out;
}

Mat ZGenerator::hessian(const Eigen::Ref<const Vec>& x) const {
  Mat out = Mat::Zero(x.size() + 1, x.size() + 1);
  out.topLeftCorner(x.size(), x.size()) = alpha * atom_hessian(atom, x);
  return out;
}

void ZGenerator::linear_row(Vec& a, double& b, double& r) const {
  const auto& aff = std::get<AffineAtom>(atom);
  a = alpha * aff.c;
  b = beta;
  r = -alpha * aff.d;
}

std::string ZGenerator::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << alpha << " * g_" << (channel + 1) << "(x) " << (beta >= 0 ? "+ " : "- ") << std::abs(beta) << " * v_"
     << (channel + 1) << " <= 0  [" << atom_kind(atom) << (convex ? "" : ", not certified convex") << "]";
  return os.str();
}

namespace {

class GeneratorFunction : public ConstraintFunction {
 public:
  explicit GeneratorFunction(ZGenerator gen) : gen_(std::move(gen)) {}
  double value(const Eigen::Ref<const Vec>& z) const override {
    const Index n = z.size() - 1;
    return gen_.value(z.head(n), z(n));
  }
  Vec gradient(const Eigen::Ref<const Vec>& z) const override { return gen_.gradient(z.head(z.size() - 1)); }
  Mat hessian(const Eigen::Ref<const Vec>& z) const override { return gen_.hessian(z.head(z.size() - 1)); }
  bool convex() const override { return gen_.convex; }

 private:
  ZGenerator gen_;
};

}  // namespace

std::shared_ptr<const ConstraintFunction> make_constraint(const ZGenerator& gen) {
  return std::make_shared<GeneratorFunction>(gen);
}

bool MixedSetZj::polyhedral() const {
  return std::all_of(generators.begin(), generators.end(), [](const ZGenerator& g) { return g.affine(); });
}

double MixedSetZj::max_violation(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& v) const {
  double worst = state_set.rows() > 0 ? state_set.max_violation(x) : -std::numeric_limits<double>::infinity();
  for (const ZGenerator& g : generators) worst = std::max(worst, g.value(x, v(g.channel)));
  return worst;
}

std::string MixedSetZj::dump() const {
  std::ostringstream os;
  os.precision(17);
  os << "Z_" << partition << ": n=" << n << " m=" << m << " state rows=" << state_set.rows() << "\n";
  for (Index r = 0; r < state_set.rows(); ++r) {
    os << "  state: " << state_set.F.row(r) << " x <= " << state_set.f(r) << "\n";
  }
  for (const ZGenerator& g : generators) os << "  " << g.describe() << "\n";
  return os.str();
}

MixedSetZj build_zj(const ConstraintUniverse& universe, const SystemModel& model, int j) {
  if (j < 1 || j > static_cast<int>(universe.partitions.size())) {
    throw Error(ErrorCode::OutOfRange, "partition index " + std::to_string(j));
  }
  const Partition& part = universe.partitions[static_cast<std::size_t>(j - 1)];
  if (!part.certified() || static_cast<Index>(part.sign_case.size()) != model.m()) {
    throw Error(ErrorCode::UncertifiedPartition, "partition " + std::to_string(j) + " has no certificate");
  }
  MixedSetZj Z;
  Z.partition = j;
  Z.state_set = part.set;
  Z.n = model.n();
  Z.m = model.m();
  const Vec& lo = universe.input_box.lower;
  const Vec& hi = universe.input_box.upper;
  for (Index i = 0; i < model.m(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const bool convex = part.curvature_ok.empty() || part.curvature_ok[k];
    const NonlinearityAtom& atom = model.g[k];
    // g >= 0: lower*g <= v <= upper*g;  g <= 0: upper*g <= v <= lower*g.
    if (part.sign_case[k] == SignCase::NonnegConcave) {
      Z.generators.push_back({i, lo(i), -1.0, atom, convex});
      Z.generators.push_back({i, -hi(i), 1.0, atom, convex});
    } else {
      Z.generators.push_back({i, hi(i), -1.0, atom, convex});
      Z.generators.push_back({i, -lo(i), 1.0, atom, convex});
    }
  }
  return Z;
}

std::vector<MixedSetZj> build_all_zj(const ConstraintUniverse& universe, const SystemModel& model) {
  std::vector<MixedSetZj> out;
  for (int j = 1; j <= static_cast<int>(universe.partitions.size()); ++j) out.push_back(build_zj(universe, model, j));
  return out;
}

Vec forward_input(const SystemModel& model, const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& u) {
  return eval_g(model, x).cwiseProduct(u);
}

Vec recover_input(const SystemModel& model, const InputBox& box, const Eigen::Ref<const Vec>& x,
                  const Eigen::Ref<const Vec>& v, const RecoverOptions& opts) {
  const Vec g = eval_g(model, x);
  Vec u = Vec::Zero(model.m());
  for (Index i = 0; i < model.m(); ++i) {
    if (std::abs(g(i)) <= opts.zero_tol) {
      if (std::abs(v(i)) > opts.consistency_tol) {
        std::ostringstream os;
        os << "channel " << (i + 1) << " has g=" << g(i) << " but v=" << v(i);
        throw Error(ErrorCode::InconsistentArtificialInput, os.str());
      }
      continue;
    }
    u(i) = v(i) / g(i);
    const double over = std::max(u(i) - box.upper(i), box.lower(i) - u(i));
    if (over > opts.clip_tol) {
      std::ostringstream os;
      os << "channel " << (i + 1) << ": u=" << u(i) << " outside [" << box.lower(i) << ", " << box.upper(i) << "]";
      throw Error(ErrorCode::InputBoxViolation, os.str());
    }
    u(i) = std::clamp(u(i), box.lower(i), box.upper(i));
  }
  return u;
}

}  // namespace cnmpc
