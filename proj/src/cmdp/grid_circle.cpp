#include "o2o/cmdp/grid_circle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace o2o::cmdp {
namespace {
constexpr int kDx[GridCircleWorld::kNumActions] = {0, 1, 0, -1, 0};
constexpr int kDy[GridCircleWorld::kNumActions] = {0, 0, 1, 0, -1};
}  // namespace

EnvSpec GridCircleWorld::make_spec(const Params& p) {
  if (p.size < 3) throw BoundsError("grid size must be at least 3");
  if (p.slip < 0.0 || p.slip > 1.0) throw BoundsError("slip probability outside [0,1]");
  EnvSpec spec;
  spec.name = "grid_circle";
  spec.obs_dim = p.size * p.size;
  spec.action_space = ActionSpace::discrete(kNumActions);
  spec.gamma = p.gamma;
  spec.cost_threshold = p.cost_threshold;
  spec.episode_length = p.episode_length;
  spec.reward_bound = 1.0;
  spec.cost_bound = 1.0;
  spec.initial_distribution = "center_cell";
  return spec;
}

GridCircleWorld::GridCircleWorld() : GridCircleWorld(Params{}) {}

GridCircleWorld::GridCircleWorld(Params params) : Environment(make_spec(params)), params_(params) {}

std::unique_ptr<Environment> GridCircleWorld::clone() const { return std::make_unique<GridCircleWorld>(*this); }

int GridCircleWorld::ring_of(int cell) const {
  const int c = params_.size / 2;
  const int x = cell % params_.size, y = cell / params_.size;
  return std::max(std::abs(x - c), std::abs(y - c));
}

int GridCircleWorld::ccw_action(int cell) const {
  const int c = params_.size / 2;
  const int dx = cell % params_.size - c, dy = cell / params_.size - c;
  const int d = std::max(std::abs(dx), std::abs(dy));
  if (d == 0) return -1;
  if (dy == -d && dx < d) return 1;
  if (dx == d && dy < d) return 2;
  if (dy == d && dx > -d) return 3;
  return 4;
}

int GridCircleWorld::move(int cell, int action) const {
  const int x = cell % params_.size + kDx[action];
  const int y = cell / params_.size + kDy[action];
  if (x < 0 || y < 0 || x >= params_.size || y >= params_.size) return cell;
  return cell_of(x, y);
}

double GridCircleWorld::reward_of(int cell, int action) const {
  if (action != ccw_action(cell)) return 0.0;
  return static_cast<double>(ring_of(cell)) / static_cast<double>(params_.size / 2);
}

Vec GridCircleWorld::observation_of(int cell) const {
  Vec o = Vec::Zero(num_cells());
  o(cell) = 1.0;
  return o;
}

int GridCircleWorld::cell_from_observation(const Vec& obs) const {
  if (obs.size() != num_cells()) throw BoundsError("grid observation has wrong size");
  Eigen::Index idx = 0;
  obs.maxCoeff(&idx);
  if (obs(idx) != 1.0 || obs.sum() != 1.0) throw BoundsError("grid observation is not one-hot");
  return static_cast<int>(idx);
}

Vec GridCircleWorld::random_observation(Rng& rng) const {
  return observation_of(std::uniform_int_distribution<int>(0, num_cells() - 1)(rng));
}

Vec GridCircleWorld::sample_initial(Rng&) {
  cell_ = start_cell();
  return observation_of(cell_);
}

Vec GridCircleWorld::inject(const Vec& observation) {
  cell_ = cell_from_observation(observation);
  return observation_of(cell_);
}

StepResult GridCircleWorld::advance(const Vec& action, Rng& rng) {
  const int intended = static_cast<int>(action(0));
  int executed = intended;
  if (params_.slip > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < params_.slip)
    executed = std::uniform_int_distribution<int>(0, kNumActions - 1)(rng);
  StepResult out;
  out.reward = reward_of(cell_, intended);
  out.cost = cost_of(cell_);
  cell_ = move(cell_, executed);
  out.observation = observation_of(cell_);
  out.done = false;
  return out;
}

oracle::TabularCmdp GridCircleWorld::to_tabular() const {
  oracle::TabularCmdp m;
  m.num_states = num_cells();
  m.num_actions = kNumActions;
  m.gamma = params_.gamma;
  m.cost_threshold = discounted_budget(params_.cost_threshold, params_.gamma, params_.episode_length);
  m.transitions = Mat::Zero(m.num_states * m.num_actions, m.num_states);
  m.reward = Mat::Zero(m.num_states, m.num_actions);
  m.cost = Mat::Zero(m.num_states, m.num_actions);
  for (int s = 0; s < m.num_states; ++s) {
    for (int a = 0; a < kNumActions; ++a) {
      m.transitions(m.row(s, a), move(s, a)) += 1.0 - params_.slip;
      for (int b = 0; b < kNumActions; ++b) m.transitions(m.row(s, a), move(s, b)) += params_.slip / kNumActions;
      m.reward(s, a) = reward_of(s, a);
      m.cost(s, a) = cost_of(s);
    }
  }
  m.initial = Vec::Zero(m.num_states);
  m.initial(start_cell()) = 1.0;
  return m;
}

double discounted_budget(double cost_threshold, double gamma, int episode_length) {
  const double per_step = cost_threshold / episode_length;
  if (gamma >= 1.0) return cost_threshold;
  return per_step * (1.0 - std::pow(gamma, episode_length)) / (1.0 - gamma);
}

oracle::TabularCmdp to_tabular(const Environment& env) {
  const auto* grid = dynamic_cast<const GridCircleWorld*>(&env);
  if (grid == nullptr) throw UnsupportedError("to_tabular: environment '" + env.spec().name + "' is not tabular");
  return grid->to_tabular();
}

GridRingPolicy::GridRingPolicy(const GridCircleWorld& world) : world_(world) {}

Vec GridRingPolicy::act(const Vec& observation, Rng&) const {
  const int cell = world_.cell_from_observation(observation);
  const int target = world_.params().size / 2 - 1;
  const int ring = world_.ring_of(cell);
  int action = 0;
  if (ring == target && target > 0) {
    action = world_.ccw_action(cell);
  } else {
    // Step toward the target ring along the axis of larger offset.
    const int c = world_.params().size / 2;
    const int dx = cell % world_.params().size - c, dy = cell / world_.params().size - c;
    const bool outward = ring < target;
    if (std::abs(dx) >= std::abs(dy)) action = ((dx >= 0) == outward) ? 1 : 3;
    else action = ((dy >= 0) == outward) ? 2 : 4;
    if (target == 0 && ring == 0) action = 0;
  }
  return Vec::Constant(1, action);
}

}  // namespace o2o::cmdp
