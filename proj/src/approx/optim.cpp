#include "o2o/approx/optim.hpp"

#include <cmath>

namespace o2o::approx {

Adam::Adam(Eigen::Index size, double learning_rate) : lr(learning_rate), m(Vec::Zero(size)), v(Vec::Zero(size)) {}

void Adam::step(Eigen::Ref<Vec> params, const Vec& grad, const std::string& what) {
  if (params.size() != grad.size() || m.size() != grad.size())
    throw BoundsError("adam: length mismatch for " + what);
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad(i)))
      throw DivergenceError("non-finite gradient for " + what + " at index " + std::to_string(i) + " (step " +
                            std::to_string(step_count + 1) + ")");
  }
  ++step_count;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

void soft_update(Vec& target, const Vec& source, double tau) {
  if (target.size() != source.size()) throw BoundsError("soft_update: length mismatch");
  if (!(tau >= 0.0 && tau <= 1.0)) throw BoundsError("soft_update: tau must lie in [0, 1]");
  target = tau * source + (1.0 - tau) * target;
}

}  // namespace o2o::approx
