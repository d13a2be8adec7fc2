#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "o2o/cmdp/grid_circle.hpp"
#include "o2o/oracle/solvers.hpp"

#include <cmath>

using namespace o2o;
using namespace o2o::oracle;

namespace {

TabularCmdp bandit(double c_th) {
  TabularCmdp m;
  m.num_states = 1;
  m.num_actions = 2;
  m.transitions = Mat::Ones(2, 1);
  m.reward = Mat(1, 2);
  m.reward << 1.0, 0.0;
  m.cost = Mat(1, 2);
  m.cost << 2.0, 0.0;
  m.gamma = 0.0;
  m.cost_threshold = c_th;
  m.initial = Vec::Ones(1);
  return m;
}

TabularCmdp random_cmdp(int states, int actions, double gamma, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TabularCmdp m;
  m.num_states = states;
  m.num_actions = actions;
  m.transitions = Mat(states * actions, states);
  for (Eigen::Index r = 0; r < m.transitions.rows(); ++r) {
    for (int s = 0; s < states; ++s) m.transitions(r, s) = u(rng);
    m.transitions.row(r) /= m.transitions.row(r).sum();
  }
  m.reward = Mat(states, actions);
  m.cost = Mat(states, actions);
  for (int s = 0; s < states; ++s)
    for (int a = 0; a < actions; ++a) {
      m.reward(s, a) = u(rng);
      m.cost(s, a) = u(rng) < 0.5 ? 1.0 : 0.0;
    }
  m.gamma = gamma;
  m.initial = Vec::Constant(states, 1.0 / states);
  m.cost_threshold = 0.5 / (1.0 - gamma);
  return m;
}

TabularPolicy random_policy(int states, int actions, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TabularPolicy p(states, actions);
  for (int s = 0; s < states; ++s) {
    for (int a = 0; a < actions; ++a) p(s, a) = u(rng);
    p.row(s) /= p.row(s).sum();
  }
  return p;
}

}  // namespace

TEST_CASE("policy evaluation with gamma 0 is the payoff table") {
  Rng rng(1);
  TabularCmdp m = random_cmdp(5, 3, 0.0, rng);
  const TabularPolicy pi = random_policy(5, 3, rng);
  CHECK(policy_eval_exact(m, pi, Channel::Reward).q == m.reward);
  CHECK(policy_eval_exact(m, pi, Channel::Cost).q == m.cost);
}

TEST_CASE("single state geometric series") {
  TabularCmdp m;
  m.num_states = 1;
  m.num_actions = 1;
  m.transitions = Mat::Ones(1, 1);
  m.reward = Mat::Ones(1, 1);
  m.cost = Mat::Zero(1, 1);
  m.gamma = 0.5;
  m.initial = Vec::Ones(1);
  CHECK(policy_eval_exact(m, Mat::Ones(1, 1), Channel::Reward).q(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("direct solve agrees with long iteration") {
  Rng rng(2);
  TabularCmdp m = random_cmdp(10, 3, 0.95, rng);
  const TabularPolicy pi = random_policy(10, 3, rng);
  for (Channel ch : {Channel::Reward, Channel::Cost}) {
    const ExactQ direct = policy_eval_exact(m, pi, ch, 1e-12, EvalMethod::DirectSolve);
    const ExactQ iter = policy_eval_exact(m, pi, ch, 1e-12, EvalMethod::Iterate);
    CHECK((direct.q - iter.q).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(direct.residual <= 1e-10);
    CHECK(bellman_residual(m, pi, ch, direct.q) <= 1e-10);
  }
}

TEST_CASE("gamma 1 without absorbing structure is refused") {
  Rng rng(3);
  TabularCmdp m = random_cmdp(4, 2, 0.9, rng);
  m.gamma = 1.0;
  CHECK_THROWS_AS(policy_eval_exact(m, random_policy(4, 2, rng), Channel::Reward), UnsupportedError);
}

TEST_CASE("lagrangian VI at lambda 0 is reward optimal") {
  Rng rng(4);
  TabularCmdp m = random_cmdp(6, 3, 0.9, rng);
  const LagrangianSolution sol = lagrangian_vi(m, 0.0);
  CHECK(sol.residual <= 1e-10);
  const TabularPolicy greedy = deterministic_policy(sol.greedy, 3);
  const Mat q = policy_eval_exact(m, greedy, Channel::Reward).q;
  // The greedy policy's value is the optimal value in every state and no
  // random policy beats it from the initial distribution.
  for (int s = 0; s < 6; ++s) CHECK(q(s, sol.greedy[s]) == doctest::Approx(sol.q.row(s).maxCoeff()).epsilon(1e-9));
  const double best = policy_value(m, greedy, Channel::Reward);
  for (int i = 0; i < 50; ++i) CHECK(policy_value(m, random_policy(6, 3, rng), Channel::Reward) <= best + 1e-9);
}

TEST_CASE("lagrangian VI is invariant to a constant reward shift") {
  Rng rng(5);
  TabularCmdp m = random_cmdp(6, 3, 0.9, rng);
  const auto a = lagrangian_vi(m, 0.7).greedy;
  m.reward.array() += 3.0;
  CHECK(lagrangian_vi(m, 0.7).greedy == a);
}

TEST_CASE("large lambda on the grid never commands a move into the boundary") {
  cmdp::GridCircleWorld world;
  const TabularCmdp tab = world.to_tabular();
  const LagrangianSolution sol = lagrangian_vi(tab, 1e4);
  for (int s = 0; s < world.num_cells(); ++s) {
    if (world.is_boundary(s)) continue;
    INFO("cell " << s << " action " << sol.greedy[s]);
    CHECK_FALSE(world.is_boundary(world.move(s, sol.greedy[s])));
  }
}

TEST_CASE("bandit constrained optimum") {
  const ConstrainedOptimum opt = constrained_optimum(bandit(1.0));
  CHECK(std::abs(opt.policy(0, 0) - 0.5) <= 1e-6);
  CHECK(std::abs(opt.reward - 0.5) <= 1e-6);
  CHECK(std::abs(opt.cost - 1.0) <= 1e-6);
}

TEST_CASE("inactive constraint returns the unconstrained optimum") {
  const ConstrainedOptimum opt = constrained_optimum(bandit(5.0));
  CHECK(opt.lambda == 0.0);
  CHECK(opt.policy(0, 0) == 1.0);
  CHECK(opt.reward == 1.0);
}

TEST_CASE("infeasible CMDP is rejected") {
  TabularCmdp m = bandit(1.0);
  m.cost(0, 1) = 3.0;
  CHECK_THROWS_AS(constrained_optimum(m), Error);
}

TEST_CASE("shrinking the budget weakly decreases the optimal reward") {
  cmdp::GridCircleWorld world;
  TabularCmdp tab = world.to_tabular();
  double prev = 1e300;
  for (double c_th : {3.0, 2.0, 1.0, 0.5, 0.2, 0.05, 0.001}) {
    tab.cost_threshold = c_th;
    const ConstrainedOptimum opt = constrained_optimum(tab);
    CHECK(opt.cost <= c_th + 1e-6);
    CHECK(opt.reward <= prev + 1e-9);
    prev = opt.reward;
  }
}

TEST_CASE("weak duality around the constrained optimum") {
  cmdp::GridCircleWorld world;
  const TabularCmdp tab = world.to_tabular();
  const ConstrainedOptimum opt = constrained_optimum(tab);
  for (double lambda : {0.0, 0.1, 0.5, 1.0, 2.0, 10.0}) {
    const TabularPolicy g = deterministic_policy(lagrangian_vi(tab, lambda).greedy, tab.num_actions);
    const double lhs = policy_value(tab, g, Channel::Reward) - lambda * (policy_value(tab, g, Channel::Cost) - tab.cost_threshold);
    const double rhs = opt.reward - lambda * (opt.cost - tab.cost_threshold);
    CHECK(lhs >= rhs - 1e-8);
  }
}

TEST_CASE("tabular json round trip") {
  cmdp::GridCircleWorld world;
  const TabularCmdp tab = world.to_tabular();
  const TabularCmdp back = tabular_from_json(to_json(tab));
  CHECK(back.transitions == tab.transitions);
  CHECK(back.reward == tab.reward);
  CHECK(back.cost == tab.cost);
  CHECK(back.gamma == tab.gamma);
  CHECK(back.cost_threshold == tab.cost_threshold);
  CHECK(back.initial == tab.initial);
  nlohmann::json j = to_json(tab);
  j["P"][0][0][0] = 0.5;
  CHECK_THROWS_AS(tabular_from_json(j), BoundsError);
}
