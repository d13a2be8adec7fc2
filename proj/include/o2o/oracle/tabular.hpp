#pragma once

#include "o2o/core.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace o2o::oracle {

/// Explicit constrained MDP: P[s][a] is a distribution over next states.
struct TabularCmdp {
  int num_states = 0;
  int num_actions = 0;
  /// Row (s * num_actions + a) holds P(. | s, a).
  Mat transitions;
  Mat reward;  // num_states x num_actions
  Mat cost;    // num_states x num_actions
  double gamma = 0.9;
  /// Bound on the discounted cumulative cost from the initial distribution.
  double cost_threshold = 0.0;
  Vec initial;  // num_states

  int row(int s, int a) const { return s * num_actions + a; }
  const Mat& channel(Channel c) const { return c == Channel::Reward ? reward : cost; }

  /// Throws BoundsError when shapes disagree or a row is not a distribution.
  void validate(double tol = 1e-9) const;
};

/// Stochastic Markov policy; row s is pi(. | s).
using TabularPolicy = Mat;

TabularPolicy deterministic_policy(const std::vector<int>& actions, int num_actions);

nlohmann::json to_json(const TabularCmdp& cmdp);
TabularCmdp tabular_from_json(const nlohmann::json& j);

}  // namespace o2o::oracle
