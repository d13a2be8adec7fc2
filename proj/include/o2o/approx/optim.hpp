#pragma once

#include "o2o/core.hpp"

#include <string>

namespace o2o::approx {

/// Adam with bias correction. Minimizes: params -= lr * m_hat / (sqrt(v_hat) + eps).
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Vec m;
  Vec v;
  long step_count = 0;

  Adam() = default;
  Adam(Eigen::Index size, double learning_rate);

  /// Raises DivergenceError (naming `what`) on a non-finite gradient and
  /// BoundsError on a length mismatch. Leaves params untouched on error.
  void step(Eigen::Ref<Vec> params, const Vec& grad, const std::string& what = "params");
};

/// target <- tau * source + (1 - tau) * target.
void soft_update(Vec& target, const Vec& source, double tau);

}  // namespace o2o::approx
