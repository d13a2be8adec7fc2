#pragma once

#include "o2o/core.hpp"

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace o2o::cmdp {

/// Discrete actions travel as a one-element vector holding the action index.
struct ActionSpace {
  enum class Kind { Discrete, Continuous };

  Kind kind = Kind::Discrete;
  int count = 0;  // discrete only
  Vec low;        // continuous only
  Vec high;

  static ActionSpace discrete(int count);
  static ActionSpace continuous(Vec low, Vec high);

  bool is_discrete() const { return kind == Kind::Discrete; }
  /// Length of the stored action vector.
  int dim() const { return is_discrete() ? 1 : static_cast<int>(low.size()); }
  /// Length of the critic-input encoding (one-hot for discrete).
  int feature_dim() const { return is_discrete() ? count : static_cast<int>(low.size()); }
  bool contains(const Vec& a) const;
  /// Writes the critic-input features of `a` into `out` (length feature_dim()).
  void encode(const Vec& a, Eigen::Ref<Vec> out) const;
  Vec sample_uniform(Rng& rng) const;
};

struct EnvSpec {
  std::string name;
  int obs_dim = 1;
  ActionSpace action_space;
  double gamma = 0.99;
  /// Budget on the undiscounted cost of one episode.
  double cost_threshold = 20.0;
  int episode_length = 200;
  double reward_bound = 1.0;
  double cost_bound = 1.0;
  std::string initial_distribution;

  void validate() const;
};

struct Transition {
  Vec s;
  Vec a;
  double r = 0.0;
  double c = 0.0;
  Vec s_next;
  bool done = false;

  bool operator==(const Transition& o) const {
    return s == o.s && a == o.a && r == o.r && c == o.c && s_next == o.s_next && done == o.done;
  }
};

struct Trajectory {
  std::vector<Transition> transitions;
  std::uint64_t seed = 0;

  std::size_t size() const { return transitions.size(); }
};

struct StepResult {
  Vec observation;
  double reward = 0.0;
  double cost = 0.0;
  bool done = false;
};

/// Episodic environment. reset() must precede step(); a step after the
/// episode ended raises ProtocolError, an out-of-space action BoundsError.
class Environment {
 public:
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }
  Vec reset(std::uint64_t seed);
  /// Starts an episode from the state behind `observation` (state injection).
  Vec reset_to(const Vec& observation, std::uint64_t seed);
  StepResult step(const Vec& action);
  int steps_taken() const { return steps_; }
  virtual std::unique_ptr<Environment> clone() const = 0;
  /// Observation of a state drawn uniformly from the whole state space
  /// (not the start distribution); accepted by reset_to().
  virtual Vec random_observation(Rng& rng) const = 0;

 protected:
  explicit Environment(EnvSpec spec);

  virtual Vec sample_initial(Rng& rng) = 0;
  virtual Vec inject(const Vec& observation) = 0;
  virtual StepResult advance(const Vec& action, Rng& rng) = 0;

 private:
  EnvSpec spec_;
  Rng rng_;
  int steps_ = 0;
  bool active_ = false;
};

/// Anything that maps observations to actions.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Vec act(const Vec& observation, Rng& rng) const = 0;
};

class UniformRandomPolicy : public Policy {
 public:
  explicit UniformRandomPolicy(ActionSpace space) : space_(std::move(space)) {}
  Vec act(const Vec& observation, Rng& rng) const override;

 private:
  ActionSpace space_;
};

/// Rolls one full episode. Environment and policy draw from separate streams
/// derived from `seed`.
Trajectory rollout(const Policy& policy, Environment& env, std::uint64_t seed);

double discounted_return(const Trajectory& traj, double gamma, Channel channel);

/// CSV with header step,s0..,a0..,r,c,done.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace o2o::cmdp
