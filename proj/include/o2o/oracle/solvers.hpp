#pragma once

#include "o2o/oracle/tabular.hpp"

namespace o2o::oracle {

/// Exact action-value table of a fixed policy on one channel.
struct ExactQ {
  Mat q;  // num_states x num_actions
  Channel channel = Channel::Reward;
  double residual = 0.0;  // sup-norm Bellman residual of q
};

enum class EvalMethod { DirectSolve, Iterate };

/// Solves Q = X + gamma * P Pi Q. gamma == 1 is accepted only when every
/// recurrent class is absorbing with zero payoff; otherwise UnsupportedError.
ExactQ policy_eval_exact(const TabularCmdp& cmdp, const TabularPolicy& policy, Channel channel,
                         double tol = 1e-10, EvalMethod method = EvalMethod::DirectSolve,
                         long max_iterations = 1'000'000);

/// Sup-norm of Q - (X + gamma P Pi Q).
double bellman_residual(const TabularCmdp& cmdp, const TabularPolicy& policy, Channel channel, const Mat& q);

/// Discounted cumulative payoff from the initial distribution, eta^T V^pi.
double policy_value(const TabularCmdp& cmdp, const TabularPolicy& policy, Channel channel);

struct LagrangianSolution {
  std::vector<int> greedy;  // argmax action per state, lowest index on ties
  Mat q;                    // optimal Q of the scalarized payoff R - lambda C
  double residual = 0.0;
};

/// Value iteration on the scalarized reward R - lambda * C.
LagrangianSolution lagrangian_vi(const TabularCmdp& cmdp, double lambda, double tol = 1e-10);

struct ConstrainedOptimum {
  double lambda = 0.0;
  TabularPolicy policy;
  double reward = 0.0;  // R(pi), discounted from the initial distribution
  double cost = 0.0;    // C(pi)
  /// Deterministic policies on either side of the multiplier kink; equal when
  /// no mixing is needed.
  std::vector<int> feasible_side;
  std::vector<int> infeasible_side;
  double mix_weight = 0.0;  // weight on infeasible_side in mixed states
};

/// Dual bisection over lambda, mixing the two boundary greedy policies so that
/// C(pi) meets the threshold. Throws Error when even the cost-minimizing
/// policy violates the threshold.
ConstrainedOptimum constrained_optimum(const TabularCmdp& cmdp, double tol = 1e-8);

}  // namespace o2o::oracle
