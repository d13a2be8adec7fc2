#pragma once

#include "o2o/approx/mlp.hpp"
#include "o2o/cmdp/env.hpp"

#include <optional>

namespace o2o::approx {

enum class HeadKind { Softmax, SquashedGaussian };

std::string to_string(HeadKind h);
HeadKind head_from_string(const std::string& name);

struct ActionSample {
  Vec action;
  double log_prob = 0.0;
};

/// Policy network with either a softmax head over discrete actions or a
/// tanh-squashed diagonal Gaussian with learnable state-independent log-std.
/// Parameter layout: [network parameters | log-std (continuous only)].
class StochasticPolicy : public cmdp::Policy {
 public:
  static constexpr double kMinLogStd = -5.0;
  static constexpr double kMaxLogStd = 2.0;

  StochasticPolicy() = default;
  StochasticPolicy(const cmdp::ActionSpace& space, Mlp net, Vec params);

  static StochasticPolicy create(int obs_dim, const cmdp::ActionSpace& space, const std::vector<int>& hidden,
                                 Rng& rng, Activation activation = Activation::Tanh, double init_log_std = -0.5);

  HeadKind head() const { return head_; }
  const cmdp::ActionSpace& action_space() const { return space_; }
  const Mlp& net() const { return net_; }
  const Vec& params() const { return params_; }
  Vec& params() { return params_; }
  Eigen::Ref<const Vec> net_params() const { return params_.head(net_.param_count()); }
  /// Clamped log-std vector (continuous head).
  Vec log_std() const;
  int action_dim() const { return space_.dim(); }

  /// Draws an action from pi(.|s) and returns its exact log-density
  /// (log-probability for the softmax head), including the tanh correction.
  ActionSample sample(const Vec& observation, Rng& rng) const;
  double log_prob(const Vec& observation, const Vec& action) const;
  /// Argmax action (softmax) or squashed mean (Gaussian).
  Vec mode(const Vec& observation) const;

  /// Softmax head: action probabilities, one column per observation.
  Mat probabilities(const Mat& observations) const;

  /// Continuous head: squashes pre-activations u into action bounds.
  Vec squash(const Vec& u) const;
  /// Continuous head: log pi of a = squash(mean + std * noise).
  double squashed_log_prob(const Vec& mean, const Vec& noise) const;

  Vec act(const Vec& observation, Rng& rng) const override { return sample(observation, rng).action; }

 private:
  cmdp::ActionSpace space_;
  HeadKind head_ = HeadKind::Softmax;
  Mlp net_;
  Vec params_;
  Vec center_;
  Vec half_range_;
};

/// Deterministic evaluation view of a stochastic policy.
class ModePolicy : public cmdp::Policy {
 public:
  explicit ModePolicy(const StochasticPolicy& policy) : policy_(policy) {}
  Vec act(const Vec& observation, Rng&) const override { return policy_.mode(observation); }

 private:
  const StochasticPolicy& policy_;
};

/// Column-stacks [observation; action features] for critic input.
Mat critic_inputs(const cmdp::ActionSpace& space, const Mat& observations, const Mat& actions);

/// Gated linear combination of critics evaluated at policy actions:
///   f(s,a) = gate(s,a) * sum_k weight_k * net_k(s,a)
/// where gate = 1{gate_net(s,a) < gate_threshold} is a stop-gradient mask
/// (identically 1 when gate_net is null).
struct ActionObjective {
  struct Term {
    const DifferentiableNet* net = nullptr;
    double weight = 1.0;
  };
  std::vector<Term> terms;
  const DifferentiableNet* gate_net = nullptr;
  double gate_threshold = 0.0;
  double entropy_weight = 0.0;
};

struct PolicyLoss {
  double value = 0.0;
  Vec grad;  // w.r.t. policy params; empty when not requested
  /// Fraction of (state, action) evaluations whose gate was open.
  double gate_open_fraction = 1.0;
};

/// L(theta) = mean_s E_{a~pi(.|s)} [ entropy_weight * log pi(a|s) + f(s,a) ].
/// Softmax head: exact expectation over actions. Gaussian head: one
/// reparameterized sample per state with standard-normal `noise`
/// (action_dim x batch), so repeated calls with the same noise are
/// deterministic functions of theta.
PolicyLoss policy_objective(const StochasticPolicy& policy, const Mat& observations, const ActionObjective& objective,
                            const Mat& noise, bool want_grad);

/// Standard-normal noise matrix for policy_objective.
Mat gaussian_noise(int rows, int cols, Rng& rng);

}  // namespace o2o::approx
