#include "o2o/cmdp/env.hpp"

#include <cmath>

namespace o2o::cmdp {

ActionSpace ActionSpace::discrete(int count) {
  if (count < 1) throw BoundsError("discrete action space needs at least one action");
  ActionSpace s;
  s.kind = Kind::Discrete;
  s.count = count;
  return s;
}

ActionSpace ActionSpace::continuous(Vec low, Vec high) {
  if (low.size() == 0 || low.size() != high.size() || (low.array() >= high.array()).any())
    throw BoundsError("continuous action space needs matching low < high bounds");
  ActionSpace s;
  s.kind = Kind::Continuous;
  s.low = std::move(low);
  s.high = std::move(high);
  return s;
}

bool ActionSpace::contains(const Vec& a) const {
  if (a.size() != dim() || !a.allFinite()) return false;
  if (is_discrete()) {
    const double idx = a(0);
    return idx == std::floor(idx) && idx >= 0.0 && idx < count;
  }
  return (a.array() >= low.array()).all() && (a.array() <= high.array()).all();
}

void ActionSpace::encode(const Vec& a, Eigen::Ref<Vec> out) const {
  if (is_discrete()) {
    out.setZero();
    out(static_cast<Eigen::Index>(a(0))) = 1.0;
  } else {
    out = a;
  }
}

Vec ActionSpace::sample_uniform(Rng& rng) const {
  if (is_discrete()) {
    std::uniform_int_distribution<int> pick(0, count - 1);
    return Vec::Constant(1, pick(rng));
  }
  Vec a(low.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = std::uniform_real_distribution<double>(low(i), high(i))(rng);
  return a;
}

void EnvSpec::validate() const {
  if (obs_dim < 1) throw BoundsError("env spec: obs_dim must be positive");
  if (gamma < 0.0 || gamma > 1.0) throw BoundsError("env spec: gamma outside [0,1]");
  if (episode_length < 1) throw BoundsError("env spec: episode_length must be >= 1");
  if (cost_threshold < 0.0) throw BoundsError("env spec: cost threshold must be nonnegative");
}

Environment::Environment(EnvSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

Vec Environment::reset(std::uint64_t seed) {
  rng_.seed(seed);
  steps_ = 0;
  active_ = true;
  return sample_initial(rng_);
}

Vec Environment::reset_to(const Vec& observation, std::uint64_t seed) {
  if (observation.size() != spec_.obs_dim) throw BoundsError("state injection: observation has wrong size");
  rng_.seed(seed);
  steps_ = 0;
  active_ = true;
  return inject(observation);
}

StepResult Environment::step(const Vec& action) {
  if (!active_) throw ProtocolError("step called before reset or after the episode ended");
  if (!spec_.action_space.contains(action)) throw BoundsError("action outside the action space");
  StepResult out = advance(action, rng_);
  ++steps_;
  if (steps_ >= spec_.episode_length) out.done = true;
  if (out.done) active_ = false;
  return out;
}

Vec UniformRandomPolicy::act(const Vec&, Rng& rng) const { return space_.sample_uniform(rng); }

Trajectory rollout(const Policy& policy, Environment& env, std::uint64_t seed) {
  Trajectory traj;
  traj.seed = seed;
  Rng policy_rng(derive_seed(seed, 1));
  Vec s = env.reset(derive_seed(seed, 0));
  traj.transitions.reserve(static_cast<std::size_t>(env.spec().episode_length));
  for (;;) {
    Vec a = policy.act(s, policy_rng);
    StepResult res = env.step(a);
    traj.transitions.push_back({s, a, res.reward, res.cost, res.observation, res.done});
    if (res.done) break;
    s = std::move(res.observation);
  }
  return traj;
}

double discounted_return(const Trajectory& traj, double gamma, Channel channel) {
  if (gamma < 0.0 || gamma > 1.0) throw BoundsError("discount outside [0,1]");
  double total = 0.0;
  double weight = 1.0;
  for (const auto& t : traj.transitions) {
    total += weight * (channel == Channel::Reward ? t.r : t.c);
    weight *= gamma;
  }
  return total;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  if (traj.transitions.empty()) {
    out << "step,r,c,done\n";
    return;
  }
  const auto& first = traj.transitions.front();
  out << "step";
  for (Eigen::Index i = 0; i < first.s.size(); ++i) out << ",s" << i;
  for (Eigen::Index i = 0; i < first.a.size(); ++i) out << ",a" << i;
  out << ",r,c,done\n";
  for (std::size_t t = 0; t < traj.transitions.size(); ++t) {
    const auto& tr = traj.transitions[t];
    out << t;
    for (Eigen::Index i = 0; i < tr.s.size(); ++i) out << ',' << format_double(tr.s(i));
    for (Eigen::Index i = 0; i < tr.a.size(); ++i) out << ',' << format_double(tr.a(i));
    out << ',' << format_double(tr.r) << ',' << format_double(tr.c) << ',' << (tr.done ? 1 : 0) << '\n';
  }
}

}  // namespace o2o::cmdp
