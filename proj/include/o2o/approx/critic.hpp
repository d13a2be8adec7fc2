#pragma once

#include "o2o/approx/policy.hpp"

#include <vector>

namespace o2o::approx {

/// Minibatch in column layout. `inputs` caches critic_inputs(s, a).
struct Batch {
  Mat s;
  Mat a;
  Mat s2;
  Vec r;
  Vec c;
  Vec done;  // 1.0 when the transition ended its episode
  Mat inputs;

  Eigen::Index size() const { return r.size(); }
};

Batch make_batch(const std::vector<cmdp::Transition>& data, const std::vector<std::size_t>& indices,
                 const cmdp::ActionSpace& space);

/// E_{a'~pi(.|s')}[ gate(s',a') * value(s',a') - entropy_weight * log pi(a'|s') ]
/// per column of next_obs. gate = 1{gate_net(s',a') < gate_threshold}, or 1
/// without gate_net. samples = 0 enumerates a softmax head exactly; otherwise
/// the mean over `samples` draws.
struct NextValueSpec {
  const DifferentiableNet* value = nullptr;
  double entropy_weight = 0.0;
  const DifferentiableNet* gate_net = nullptr;
  double gate_threshold = 0.0;
  int samples = 1;
};

Vec expected_next_value(const StochasticPolicy& policy, const Mat& next_obs, const NextValueSpec& spec, Rng& rng);

/// y = x + gamma * (1 - done) * next
Vec bellman_targets(const Vec& x, const Vec& done, const Vec& next, double gamma);

/// Mean network output over the columns of `inputs`; adds
/// scale * d(mean)/d(params) into `grad` when non-null.
double mean_output(const DifferentiableNet& net, const Mat& inputs, Vec* grad, double scale = 1.0);

/// Indices drawn uniformly with replacement from [0, n).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, Rng& rng);

}  // namespace o2o::approx
