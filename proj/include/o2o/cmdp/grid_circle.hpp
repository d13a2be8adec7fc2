#pragma once

#include "o2o/cmdp/env.hpp"
#include "o2o/oracle/tabular.hpp"

namespace o2o::cmdp {

/// N x N grid. Actions: 0 stay, 1 +x, 2 +y, 3 -x, 4 -y; moves into a wall
/// leave the agent in place. With probability `slip` the executed action is
/// drawn uniformly from all five. Moving counter-clockwise along the square
/// ring at Chebyshev distance d from the center pays d / (N/2); every step
/// taken from a boundary cell costs 1. Observations are one-hot cells.
class GridCircleWorld : public Environment {
 public:
  struct Params {
    int size = 7;
    double slip = 0.1;
    int episode_length = 100;
    double gamma = 0.9;
    double cost_threshold = 10.0;
  };

  static constexpr int kNumActions = 5;

  GridCircleWorld();
  explicit GridCircleWorld(Params params);

  std::unique_ptr<Environment> clone() const override;
  Vec random_observation(Rng& rng) const override;

  const Params& params() const { return params_; }
  int num_cells() const { return params_.size * params_.size; }
  int cell_of(int x, int y) const { return y * params_.size + x; }
  int start_cell() const { return cell_of(params_.size / 2, params_.size / 2); }
  int ring_of(int cell) const;  // Chebyshev distance from the center
  bool is_boundary(int cell) const { return ring_of(cell) == params_.size / 2; }
  /// Counter-clockwise tangent action at `cell`, or -1 at the center.
  int ccw_action(int cell) const;
  int move(int cell, int action) const;
  double reward_of(int cell, int action) const;
  double cost_of(int cell) const { return is_boundary(cell) ? 1.0 : 0.0; }

  Vec observation_of(int cell) const;
  /// Index of the hot entry; throws BoundsError for a non one-hot vector.
  int cell_from_observation(const Vec& obs) const;

  oracle::TabularCmdp to_tabular() const;

 protected:
  Vec sample_initial(Rng& rng) override;
  Vec inject(const Vec& observation) override;
  StepResult advance(const Vec& action, Rng& rng) override;

 private:
  static EnvSpec make_spec(const Params& p);

  Params params_;
  int cell_ = 0;
};

/// Undiscounted per-episode budget expressed as a discounted cumulative cost:
/// the discounted cost of spending threshold/T every step for T steps.
double discounted_budget(double cost_threshold, double gamma, int episode_length);

/// Exports the explicit tensors of a GridCircleWorld; UnsupportedError otherwise.
oracle::TabularCmdp to_tabular(const Environment& env);

/// Safe scripted policy: walks out to the ring one inside the boundary and
/// circles it counter-clockwise.
class GridRingPolicy : public Policy {
 public:
  explicit GridRingPolicy(const GridCircleWorld& world);
  Vec act(const Vec& observation, Rng& rng) const override;

 private:
  GridCircleWorld world_;
};

}  // namespace o2o::cmdp
