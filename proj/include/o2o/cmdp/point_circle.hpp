#pragma once

#include "o2o/cmdp/env.hpp"

namespace o2o::cmdp {

/// Planar point mass with velocity actions in [-1,1]^2, displacement
/// max_speed * a per step, position clamped to the arena box. The reward is
/// the counter-clockwise angle swept, measured as arc length on the reference
/// circle of radius `radius` and normalized by the largest step length, then
/// clipped to [0, reward_cap]. Cutting inside the circle sweeps angle faster
/// but leaves the safe band |‖pos‖ - radius| <= band, costing 1 per step
/// that ends outside it. Dynamics are deterministic; only the start is random.
class PointCircle : public Environment {
 public:
  struct Params {
    double radius = 1.0;
    double band = 0.25;
    double max_speed = 0.1;
    double reward_cap = 2.0;
    double arena = 2.0;
    double start_jitter = 0.1;  // start radius uniform in radius +- jitter
    int episode_length = 200;
    double gamma = 0.99;
    double cost_threshold = 20.0;
  };

  PointCircle();
  explicit PointCircle(Params params);

  std::unique_ptr<Environment> clone() const override;
  Vec random_observation(Rng& rng) const override;

  const Params& params() const { return params_; }
  const Vec& position() const { return pos_; }
  bool in_band(const Vec& pos) const;

 protected:
  Vec sample_initial(Rng& rng) override;
  Vec inject(const Vec& observation) override;
  StepResult advance(const Vec& action, Rng& rng) override;

 private:
  static EnvSpec make_spec(const Params& p);

  Params params_;
  Vec pos_ = Vec::Zero(2);
};

/// Scripted safe circler: tracks the reference circle counter-clockwise at a
/// fraction of full speed with a proportional radial correction.
class CircleTrackingPolicy : public Policy {
 public:
  explicit CircleTrackingPolicy(const PointCircle& env, double speed_fraction = 0.8, double radial_gain = 5.0);
  Vec act(const Vec& observation, Rng& rng) const override;

 private:
  double radius_;
  double speed_;
  double gain_;
};

}  // namespace o2o::cmdp
