#include "o2o/cmdp/point_circle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace o2o::cmdp {

EnvSpec PointCircle::make_spec(const Params& p) {
  if (p.radius <= 0.0 || p.band <= 0.0 || p.max_speed <= 0.0 || p.reward_cap <= 0.0 || p.arena <= p.radius)
    throw BoundsError("point circle: invalid geometry parameters");
  EnvSpec spec;
  spec.name = "point_circle";
  spec.obs_dim = 2;
  spec.action_space = ActionSpace::continuous(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
  spec.gamma = p.gamma;
  spec.cost_threshold = p.cost_threshold;
  spec.episode_length = p.episode_length;
  spec.reward_bound = p.reward_cap;
  spec.cost_bound = 1.0;
  spec.initial_distribution = "uniform_angle_jittered_radius";
  return spec;
}

PointCircle::PointCircle() : PointCircle(Params{}) {}

PointCircle::PointCircle(Params params) : Environment(make_spec(params)), params_(params) {}

std::unique_ptr<Environment> PointCircle::clone() const { return std::make_unique<PointCircle>(*this); }

bool PointCircle::in_band(const Vec& pos) const { return std::abs(pos.norm() - params_.radius) <= params_.band; }

Vec PointCircle::random_observation(Rng& rng) const {
  std::uniform_real_distribution<double> u(-params_.arena, params_.arena);
  Vec pos(2);
  pos(0) = u(rng);
  pos(1) = u(rng);
  return pos;
}

Vec PointCircle::sample_initial(Rng& rng) {
  const double angle = std::uniform_real_distribution<double>(-std::numbers::pi, std::numbers::pi)(rng);
  const double r = params_.radius +
                   std::uniform_real_distribution<double>(-params_.start_jitter, params_.start_jitter)(rng);
  pos_ = Vec(2);
  pos_ << r * std::cos(angle), r * std::sin(angle);
  return pos_;
}

Vec PointCircle::inject(const Vec& observation) {
  pos_ = observation.cwiseMax(-params_.arena).cwiseMin(params_.arena);
  return pos_;
}

StepResult PointCircle::advance(const Vec& action, Rng&) {
  Vec next = (pos_ + params_.max_speed * action).cwiseMax(-params_.arena).cwiseMin(params_.arena);
  const double cross = pos_(0) * next(1) - pos_(1) * next(0);
  const double dot = pos_.dot(next);
  const double swept = (cross == 0.0 && dot == 0.0) ? 0.0 : std::atan2(cross, dot);
  const double progress = params_.radius * swept / (std::numbers::sqrt2 * params_.max_speed);
  StepResult out;
  out.reward = std::clamp(progress, 0.0, params_.reward_cap);
  out.cost = in_band(next) ? 0.0 : 1.0;
  pos_ = next;
  out.observation = pos_;
  out.done = false;
  return out;
}

CircleTrackingPolicy::CircleTrackingPolicy(const PointCircle& env, double speed_fraction, double radial_gain)
    : radius_(env.params().radius), speed_(speed_fraction), gain_(radial_gain) {}

Vec CircleTrackingPolicy::act(const Vec& observation, Rng&) const {
  const double r = observation.norm();
  Vec a = Vec::Zero(2);
  if (r < 1e-9) {
    a(0) = speed_;
    return a;
  }
  const Vec radial = observation / r;
  Vec tangent(2);
  tangent << -radial(1), radial(0);
  a = speed_ * std::numbers::sqrt2 * tangent + gain_ * (radius_ - r) * radial;
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

}  // namespace o2o::cmdp
