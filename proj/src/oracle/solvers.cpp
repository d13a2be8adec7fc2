#include "o2o/oracle/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace o2o::oracle {
namespace {

// P_pi(s, t) = sum_a pi(a|s) P(t|s,a)
Mat state_transitions(const TabularCmdp& m, const TabularPolicy& pi) {
  Mat p = Mat::Zero(m.num_states, m.num_states);
  for (int s = 0; s < m.num_states; ++s)
    for (int a = 0; a < m.num_actions; ++a)
      if (pi(s, a) != 0.0) p.row(s) += pi(s, a) * m.transitions.row(m.row(s, a));
  return p;
}

Vec state_payoff(const TabularPolicy& pi, const Mat& x) {
  return (pi.array() * x.array()).rowwise().sum();
}

// Q(s,a) = X(s,a) + gamma * sum_t P(t|s,a) V(t)
Mat q_from_v(const TabularCmdp& m, const Mat& x, const Vec& v) {
  Vec next = m.transitions * v;
  Mat q(m.num_states, m.num_actions);
  for (int s = 0; s < m.num_states; ++s)
    for (int a = 0; a < m.num_actions; ++a) q(s, a) = x(s, a) + m.gamma * next(m.row(s, a));
  return q;
}

double residual_of(const TabularCmdp& m, const TabularPolicy& pi, const Mat& x, const Mat& q) {
  Vec v = (pi.array() * q.array()).rowwise().sum();
  return (q - q_from_v(m, x, v)).cwiseAbs().maxCoeff();
}

void check_policy(const TabularCmdp& m, const TabularPolicy& pi) {
  if (pi.rows() != m.num_states || pi.cols() != m.num_actions)
    throw BoundsError("policy matrix has wrong shape");
  for (int s = 0; s < m.num_states; ++s)
    if ((pi.row(s).array() < 0.0).any() || std::abs(pi.row(s).sum() - 1.0) > 1e-9)
      throw BoundsError("policy row " + std::to_string(s) + " is not a distribution");
}

Mat evaluate_payoff(const TabularCmdp& m, const TabularPolicy& pi, const Mat& x, double tol, EvalMethod method,
                    long max_iterations, double* residual_out) {
  Mat q;
  if (method == EvalMethod::Iterate) {
    if (m.gamma >= 1.0) throw UnsupportedError("iterative evaluation needs gamma < 1");
    q = x;
    for (long it = 0; it < max_iterations; ++it) {
      Vec v = (pi.array() * q.array()).rowwise().sum();
      Mat next = q_from_v(m, x, v);
      const double delta = (next - q).cwiseAbs().maxCoeff();
      q = std::move(next);
      if (delta <= tol * (1.0 - m.gamma)) break;
    }
  } else {
    const Mat p = state_transitions(m, pi);
    const Vec xs = state_payoff(pi, x);
    Vec v = Vec::Zero(m.num_states);
    if (m.gamma < 1.0) {
      Mat a = Mat::Identity(m.num_states, m.num_states) - m.gamma * p;
      v = a.partialPivLu().solve(xs);
    } else {
      // Undiscounted: zero-payoff absorbing states pin V = 0; the rest must be transient.
      std::vector<int> live;
      for (int s = 0; s < m.num_states; ++s) {
        const bool absorbing = std::abs(p(s, s) - 1.0) < 1e-12 && std::abs(xs(s)) < 1e-12;
        if (!absorbing) live.push_back(s);
      }
      const auto n = static_cast<Eigen::Index>(live.size());
      Mat a(n, n);
      Vec b(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        b(i) = xs(live[i]);
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = (i == j ? 1.0 : 0.0) - p(live[i], live[j]);
      }
      Eigen::FullPivLU<Mat> lu(a);
      if (n > 0 && !lu.isInvertible())
        throw UnsupportedError("gamma = 1 without absorbing structure: evaluation is non-contractive");
      Vec sol = n > 0 ? Vec(lu.solve(b)) : Vec();
      for (Eigen::Index i = 0; i < n; ++i) v(live[i]) = sol(i);
    }
    q = q_from_v(m, x, v);
    // Iterative refinement shrinks the residual by gamma per sweep.
    for (int sweep = 0; sweep < 100 && m.gamma < 1.0; ++sweep) {
      if (residual_of(m, pi, x, q) <= tol) break;
      Vec vq = (pi.array() * q.array()).rowwise().sum();
      q = q_from_v(m, x, vq);
    }
  }
  if (residual_out) *residual_out = residual_of(m, pi, x, q);
  return q;
}

std::vector<int> greedy_of(const Mat& q) {
  std::vector<int> g(static_cast<std::size_t>(q.rows()));
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    const double best = q.row(s).maxCoeff();
    const double slack = 1e-9 * (1.0 + std::abs(best));
    Eigen::Index a = 0;
    while (q(s, a) < best - slack) ++a;
    g[static_cast<std::size_t>(s)] = static_cast<int>(a);
  }
  return g;
}

LagrangianSolution solve_scalarized(const TabularCmdp& m, const Mat& payoff, double tol, Vec* warm) {
  Vec v = (warm && warm->size() == m.num_states) ? *warm : Vec(Vec::Zero(m.num_states));
  const double g2 = m.gamma * m.gamma;
  for (long it = 0; it < 10'000'000; ++it) {
    Vec next = q_from_v(m, payoff, v).rowwise().maxCoeff();
    const double delta = (next - v).cwiseAbs().maxCoeff();
    v = std::move(next);
    const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
    if (g2 * delta <= 0.5 * tol * scale || m.gamma == 0.0) break;
  }
  LagrangianSolution out;
  Mat q = q_from_v(m, payoff, v);
  out.greedy = greedy_of(q);
  // Policy-iteration polish: evaluate the greedy policy exactly, improve until stable.
  for (int round = 0; round < 100; ++round) {
    TabularPolicy pi = deterministic_policy(out.greedy, m.num_actions);
    double res = 0.0;
    q = evaluate_payoff(m, pi, payoff, tol, EvalMethod::DirectSolve, 0, &res);
    auto improved = greedy_of(q);
    bool changed = false;
    for (int s = 0; s < m.num_states; ++s) {
      const auto su = static_cast<std::size_t>(s);
      const double gain = q(s, improved[su]) - q(s, out.greedy[su]);
      if (improved[su] != out.greedy[su] && gain > 1e-9 * (1.0 + std::abs(q(s, out.greedy[su])))) {
        out.greedy[su] = improved[su];
        changed = true;
      }
    }
    if (!changed) break;
  }
  out.q = q;
  Vec vq = q.rowwise().maxCoeff();
  out.residual = (q - q_from_v(m, payoff, vq)).cwiseAbs().maxCoeff();
  if (warm) *warm = vq;
  return out;
}

}  // namespace

ExactQ policy_eval_exact(const TabularCmdp& cmdp, const TabularPolicy& policy, Channel channel, double tol,
                         EvalMethod method, long max_iterations) {
  check_policy(cmdp, policy);
  ExactQ out;
  out.channel = channel;
  out.q = evaluate_payoff(cmdp, policy, cmdp.channel(channel), tol, method, max_iterations, &out.residual);
  return out;
}

double bellman_residual(const TabularCmdp& cmdp, const TabularPolicy& policy, Channel channel, const Mat& q) {
  return residual_of(cmdp, policy, cmdp.channel(channel), q);
}

double policy_value(const TabularCmdp& cmdp, const TabularPolicy& policy, Channel channel) {
  const Mat q = policy_eval_exact(cmdp, policy, channel).q;
  const Vec v = (policy.array() * q.array()).rowwise().sum();
  return cmdp.initial.dot(v);
}

LagrangianSolution lagrangian_vi(const TabularCmdp& cmdp, double lambda, double tol) {
  if (lambda < 0.0) throw BoundsError("lagrange multiplier must be nonnegative");
  if (cmdp.gamma >= 1.0) throw UnsupportedError("value iteration needs gamma < 1");
  const Mat payoff = cmdp.reward - lambda * cmdp.cost;
  return solve_scalarized(cmdp, payoff, tol, nullptr);
}

ConstrainedOptimum constrained_optimum(const TabularCmdp& cmdp, double tol) {
  if (cmdp.gamma >= 1.0) throw UnsupportedError("constrained optimum needs gamma < 1");
  const double eval_tol = 1e-10;
  Vec warm;
  auto greedy_at = [&](double lambda) {
    return solve_scalarized(cmdp, cmdp.reward - lambda * cmdp.cost, eval_tol, &warm).greedy;
  };
  auto cost_of = [&](const TabularPolicy& pi) { return policy_value(cmdp, pi, Channel::Cost); };
  auto reward_of = [&](const TabularPolicy& pi) { return policy_value(cmdp, pi, Channel::Reward); };

  ConstrainedOptimum out;
  auto unconstrained = greedy_at(0.0);
  TabularPolicy pi0 = deterministic_policy(unconstrained, cmdp.num_actions);
  if (cost_of(pi0) <= cmdp.cost_threshold + tol) {
    out.lambda = 0.0;
    out.policy = pi0;
    out.feasible_side = out.infeasible_side = unconstrained;
    out.reward = reward_of(pi0);
    out.cost = cost_of(pi0);
    return out;
  }

  // Cost-minimizing policy, reward used only to break ties.
  const auto min_cost = solve_scalarized(cmdp, -cmdp.cost + 1e-9 * cmdp.reward, eval_tol, nullptr).greedy;
  const double c_min = cost_of(deterministic_policy(min_cost, cmdp.num_actions));
  if (c_min > cmdp.cost_threshold + tol)
    throw Error("infeasible cmdp: minimum achievable cost " + format_double(c_min) + " exceeds threshold " +
                format_double(cmdp.cost_threshold));

  const double r_max = std::max(1e-12, cmdp.reward.cwiseAbs().maxCoeff());
  const double eps_c = std::max(cmdp.cost_threshold - c_min, 1e-6);
  double hi = r_max / ((1.0 - cmdp.gamma) * eps_c);
  auto hi_policy = greedy_at(hi);
  for (int k = 0; k < 60 && cost_of(deterministic_policy(hi_policy, cmdp.num_actions)) > cmdp.cost_threshold; ++k) {
    hi *= 2.0;
    hi_policy = greedy_at(hi);
  }
  if (cost_of(deterministic_policy(hi_policy, cmdp.num_actions)) > cmdp.cost_threshold) hi_policy = min_cost;

  double lo = 0.0;
  auto lo_policy = unconstrained;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    auto g = greedy_at(mid);
    if (cost_of(deterministic_policy(g, cmdp.num_actions)) > cmdp.cost_threshold) {
      lo = mid;
      lo_policy = std::move(g);
    } else {
      hi = mid;
      hi_policy = std::move(g);
    }
  }
  out.lambda = 0.5 * (lo + hi);
  out.feasible_side = hi_policy;
  out.infeasible_side = lo_policy;

  // Mix the two greedy policies in the states where they disagree.
  auto mixed = [&](double w) {
    TabularPolicy pi = deterministic_policy(hi_policy, cmdp.num_actions);
    for (int s = 0; s < cmdp.num_states; ++s) {
      const auto su = static_cast<std::size_t>(s);
      if (hi_policy[su] != lo_policy[su]) {
        pi(s, hi_policy[su]) = 1.0 - w;
        pi(s, lo_policy[su]) = w;
      }
    }
    return pi;
  };
  double w_lo = 0.0, w_hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double w = 0.5 * (w_lo + w_hi);
    const double c = cost_of(mixed(w));
    if (c > cmdp.cost_threshold) w_hi = w;
    else w_lo = w;
    if (std::abs(c - cmdp.cost_threshold) <= tol * 1e-2 || w_hi - w_lo < 1e-15) break;
  }
  out.mix_weight = w_lo;
  out.policy = mixed(w_lo);
  out.reward = reward_of(out.policy);
  out.cost = cost_of(out.policy);
  return out;
}

}  // namespace o2o::oracle
