#pragma once

#include "o2o/core.hpp"

#include <cmath>
#include <functional>

namespace o2o::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  Eigen::Index worst = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central differences of f around x, compared coordinate-wise with the
/// analytic gradient. The denominator has an absolute floor so coordinates
/// with both gradients near zero do not divide round-off by zero.
inline GradCheck check_gradient(const std::function<double(const Vec&)>& f, const Vec& x, const Vec& analytic,
                                double h = 1e-5, double floor = 1e-6) {
  GradCheck out;
  Vec probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(analytic(i)), floor});
    const double rel = std::abs(fd - analytic(i)) / denom;
    if (out.worst < 0 || rel > out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst = i;
      out.analytic = analytic(i);
      out.numeric = fd;
    }
  }
  return out;
}

}  // namespace o2o::testing
