#include "o2o/approx/critic.hpp"

namespace o2o::approx {

Batch make_batch(const std::vector<cmdp::Transition>& data, const std::vector<std::size_t>& indices,
                 const cmdp::ActionSpace& space) {
  if (indices.empty()) throw BoundsError("empty batch");
  const auto& first = data.at(indices.front());
  const Eigen::Index n = static_cast<Eigen::Index>(indices.size());
  Batch b;
  b.s.resize(first.s.size(), n);
  b.a.resize(first.a.size(), n);
  b.s2.resize(first.s_next.size(), n);
  b.r.resize(n);
  b.c.resize(n);
  b.done.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = data.at(indices[static_cast<std::size_t>(i)]);
    b.s.col(i) = t.s;
    b.a.col(i) = t.a;
    b.s2.col(i) = t.s_next;
    b.r(i) = t.r;
    b.c(i) = t.c;
    b.done(i) = t.done ? 1.0 : 0.0;
  }
  b.inputs = critic_inputs(space, b.s, b.a);
  return b;
}

Vec expected_next_value(const StochasticPolicy& policy, const Mat& next_obs, const NextValueSpec& spec, Rng& rng) {
  if (spec.value == nullptr) throw ProtocolError("expected_next_value: no value network");
  const auto& space = policy.action_space();
  const Eigen::Index n = next_obs.cols();
  Vec out = Vec::Zero(n);
  auto payoff = [&](const Mat& actions, const Vec& logp, const Vec& weight) {
    const Mat x = critic_inputs(space, next_obs, actions);
    Vec v = spec.value->forward_batch(x).row(0).transpose();
    if (spec.gate_net) {
      const Vec g = spec.gate_net->forward_batch(x).row(0).transpose();
      for (Eigen::Index i = 0; i < n; ++i)
        if (!(g(i) < spec.gate_threshold)) v(i) = 0.0;
    }
    out.array() += weight.array() * (v - spec.entropy_weight * logp).array();
  };
  if (spec.samples == 0) {
    if (policy.head() != HeadKind::Softmax) throw UnsupportedError("exact next-action expectation needs a softmax head");
    const Mat prob = policy.probabilities(next_obs);
    for (int a = 0; a < space.count; ++a) {
      const Vec p = prob.row(a).transpose();
      const Vec logp = p.array().max(1e-300).log();
      payoff(Mat::Constant(1, n, a), logp, p);
    }
    return out;
  }
  if (spec.samples < 0) throw BoundsError("expected_next_value: negative sample count");
  const Vec w = Vec::Constant(n, 1.0 / spec.samples);
  for (int m = 0; m < spec.samples; ++m) {
    Mat actions(space.dim(), n);
    Vec logp(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const ActionSample smp = policy.sample(next_obs.col(i), rng);
      actions.col(i) = smp.action;
      logp(i) = smp.log_prob;
    }
    payoff(actions, logp, w);
  }
  return out;
}

Vec bellman_targets(const Vec& x, const Vec& done, const Vec& next, double gamma) {
  if (x.size() != done.size() || x.size() != next.size()) throw BoundsError("bellman_targets: size mismatch");
  return x.array() + gamma * (1.0 - done.array()) * next.array();
}

double mean_output(const DifferentiableNet& net, const Mat& inputs, Vec* grad, double scale) {
  const Eigen::Index n = inputs.cols();
  if (n == 0) throw BoundsError("mean_output: empty input");
  Mlp::Tape tape;
  const Mat out = net.arch.forward(net.params, inputs, tape);
  if (grad) {
    if (grad->size() != net.params.size()) throw BoundsError("mean_output: gradient buffer has wrong size");
    net.arch.backward(net.params, tape, Mat::Constant(1, n, scale / static_cast<double>(n)), *grad);
  }
  return out.mean();
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, Rng& rng) {
  if (n == 0) throw BoundsError("cannot sample from an empty collection");
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

}  // namespace o2o::approx
