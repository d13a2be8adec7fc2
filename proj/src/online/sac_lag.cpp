#include "o2o/online/sac_lag.hpp"

#include "o2o/approx/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace o2o::online {

using approx::Batch;
using approx::DifferentiableNet;

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw BoundsError("replay buffer capacity must be positive");
}

void ReplayBuffer::add(const cmdp::Transition& t) {
  ++insertions_;
  if (data_.size() < capacity_) {
    data_.push_back(t);
    return;
  }
  data_[head_] = t;
  head_ = (head_ + 1) % capacity_;
}

const cmdp::Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= data_.size()) throw BoundsError("replay buffer index out of range");
  return data_[(head_ + i) % data_.size()];
}

Batch ReplayBuffer::sample(std::size_t count, const cmdp::ActionSpace& space, Rng& rng) const {
  return approx::make_batch(data_, approx::sample_indices(data_.size(), count, rng), space);
}

std::string to_string(InitMode m) { return m == InitMode::WarmStart ? "warm_start" : "from_scratch"; }

InitMode init_mode_from_string(const std::string& name) {
  if (name == "warm_start") return InitMode::WarmStart;
  if (name == "from_scratch") return InitMode::FromScratch;
  throw ConfigError("unknown init mode '" + name + "' (expected warm_start or from_scratch)");
}

void SacLagConfig::validate() const {
  if (alpha < 0.0) throw ConfigError("sac.alpha must be >= 0");
  if (batch_size < 1) throw ConfigError("sac.batch_size must be positive");
  if (episodes_per_update < 1) throw ConfigError("sac.episodes_per_update must be positive");
  if (total_steps < 0) throw ConfigError("sac.total_steps must be >= 0");
  if (updates_per_round < 0) throw ConfigError("sac.updates_per_round must be >= 0");
  if (eval_every < 1) throw ConfigError("sac.eval_every must be positive");
  if (eval_episodes < 1) throw ConfigError("sac.eval_episodes must be positive");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("sac.tau must lie in [0, 1]");
  if (buffer_capacity == 0) throw ConfigError("sac.buffer_capacity must be positive");
}

Vec sac_q_targets(const Batch& batch, const approx::StochasticPolicy& policy, const DifferentiableNet& q_target,
                  const SacLagConfig& cfg, Rng& rng) {
  approx::NextValueSpec spec;
  spec.value = &q_target;
  spec.entropy_weight = cfg.alpha;
  spec.samples = cfg.next_samples;
  return approx::bellman_targets(batch.r, batch.done, approx::expected_next_value(policy, batch.s2, spec, rng),
                                 cfg.gamma);
}

Vec sac_qc_targets(const Batch& batch, const approx::StochasticPolicy& policy, const DifferentiableNet& qc_target,
                   const SacLagConfig& cfg, Rng& rng) {
  approx::NextValueSpec spec;
  spec.value = &qc_target;
  spec.samples = cfg.next_samples;
  return approx::bellman_targets(batch.c, batch.done, approx::expected_next_value(policy, batch.s2, spec, rng),
                                 cfg.gamma);
}

approx::PolicyLoss sac_policy_loss(const approx::StochasticPolicy& policy, const Mat& observations,
                                   const DifferentiableNet& q, const DifferentiableNet& qc, double lambda,
                                   double alpha, const Mat& noise, bool want_grad) {
  approx::ActionObjective obj;
  obj.terms.push_back({&q, -1.0});
  if (lambda != 0.0) obj.terms.push_back({&qc, lambda});
  obj.entropy_weight = alpha;
  return approx::policy_objective(policy, observations, obj, noise, want_grad);
}

double sac_q_update(const Batch& batch, approx::AgentNets& nets, const SacLagConfig& cfg, Rng& rng) {
  const Vec y = sac_q_targets(batch, nets.policy, nets.q_target_net(), cfg, rng);
  Vec g = Vec::Zero(nets.q.params.size());
  const double loss = approx::mse_loss(nets.q, batch.inputs, y, &g);
  nets.q_opt.step(nets.q.params, g, "reward critic");
  return loss;
}

double sac_qc_update(const Batch& batch, approx::AgentNets& nets, const SacLagConfig& cfg, Rng& rng) {
  const Vec y = sac_qc_targets(batch, nets.policy, nets.qc_target_net(), cfg, rng);
  Vec g = Vec::Zero(nets.qc.params.size());
  const double loss = approx::mse_loss(nets.qc, batch.inputs, y, &g);
  nets.qc_opt.step(nets.qc.params, g, "cost critic");
  return loss;
}

double sac_policy_update(const Batch& batch, approx::AgentNets& nets, double lambda, const SacLagConfig& cfg,
                         Rng& rng) {
  Mat noise;
  if (nets.policy.head() == approx::HeadKind::SquashedGaussian)
    noise = approx::gaussian_noise(nets.policy.action_dim(), static_cast<int>(batch.size()), rng);
  const auto loss = sac_policy_loss(nets.policy, batch.s, nets.q, nets.qc, lambda, cfg.alpha, noise, true);
  nets.policy_opt.step(nets.policy.params(), loss.grad, "policy");
  return loss.value;
}

EvalResult evaluate_policy(const approx::StochasticPolicy& policy, const cmdp::Environment& env, int n_episodes,
                           std::uint64_t seed) {
  if (n_episodes < 1) throw BoundsError("evaluate_policy: need at least one episode");
  const approx::ModePolicy greedy(policy);
  auto sim = env.clone();
  EvalResult res;
  for (int i = 0; i < n_episodes; ++i) {
    const auto traj = cmdp::rollout(greedy, *sim, derive_seed(seed, static_cast<std::uint64_t>(i)));
    res.returns.push_back(cmdp::discounted_return(traj, 1.0, Channel::Reward));
    res.costs.push_back(cmdp::discounted_return(traj, 1.0, Channel::Cost));
  }
  for (std::size_t i = 0; i < res.returns.size(); ++i) {
    res.mean_return += res.returns[i];
    res.mean_cost += res.costs[i];
  }
  res.mean_return /= n_episodes;
  res.mean_cost /= n_episodes;
  return res;
}

namespace {
const char* kMetricsHeader = "step,eval_return,eval_cost,lambda,kp,ki,kd,err,cum_env_cost,max_return_so_far";
}

void write_metrics_header(std::ostream& out) { out << kMetricsHeader << '\n'; }

void write_metrics_row(std::ostream& out, const MetricsRow& r) {
  out << r.step << ',' << format_double(r.eval_return) << ',' << format_double(r.eval_cost) << ','
      << format_double(r.lambda) << ',' << format_double(r.kp) << ',' << format_double(r.ki) << ','
      << format_double(r.kd) << ',' << format_double(r.err) << ',' << format_double(r.cum_env_cost) << ','
      << format_double(r.max_return_so_far) << '\n';
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  write_metrics_header(out);
  for (const auto& r : rows) write_metrics_row(out, r);
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw ParseError("metrics csv: unexpected header");
  std::vector<MetricsRow> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> f;
    std::stringstream ss(line);
    std::string cell;
    try {
      while (std::getline(ss, cell, ',')) f.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ParseError("metrics csv line " + std::to_string(line_no) + ": bad number");
    }
    if (f.size() != 10) throw ParseError("metrics csv line " + std::to_string(line_no) + ": expected 10 fields");
    rows.push_back({static_cast<long>(f[0]), f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8], f[9]});
  }
  return rows;
}

FinetuneResult finetune_loop(const cmdp::Environment& env, approx::AgentNets init, lagrange::Controller controller,
                             const SacLagConfig& cfg, std::uint64_t seed, const RoundHook& hook) {
  cfg.validate();
  FinetuneResult res;
  res.nets = std::move(init);
  res.controller = std::move(controller);
  if (cfg.total_steps == 0) return res;

  auto& nets = res.nets;
  nets.reset_optimizers(cfg.policy_lr, cfg.q_lr, cfg.qc_lr);
  const auto& spec = env.spec();
  auto sim = env.clone();
  ReplayBuffer buffer(cfg.buffer_capacity);
  Rng rng(derive_seed(seed, 40));
  double cum_cost = 0.0;
  double max_return = -std::numeric_limits<double>::infinity();
  std::uint64_t episode = 0;

  auto log_row = [&](long step, const lagrange::TraceRow* tr) {
    const EvalResult ev = evaluate_policy(nets.policy, env, cfg.eval_episodes, derive_seed(seed, 50 + step));
    max_return = std::max(max_return, ev.mean_return);
    MetricsRow row;
    row.step = step;
    row.eval_return = ev.mean_return;
    row.eval_cost = ev.mean_cost;
    row.lambda = res.controller.lambda();
    if (tr) {
      row.kp = tr->kp;
      row.ki = tr->ki;
      row.kd = tr->kd;
      row.err = tr->err;
    } else if (res.controller.kind() != lagrange::ControllerKind::Dual) {
      row.kp = res.controller.state().pid.gains.kp;
      row.ki = res.controller.state().pid.gains.ki;
      row.kd = res.controller.state().pid.gains.kd;
    }
    row.cum_env_cost = cum_cost;
    row.max_return_so_far = max_return;
    res.metrics.push_back(row);
  };

  log_row(0, nullptr);
  for (long step = 1; step <= cfg.total_steps; ++step) {
    std::vector<double> costs;
    for (int e = 0; e < cfg.episodes_per_update; ++e) {
      const auto traj = cmdp::rollout(nets.policy, *sim, derive_seed(derive_seed(seed, 41), episode++));
      double c = 0.0;
      for (const auto& t : traj.transitions) {
        buffer.add(t);
        c += t.c;
      }
      res.env_steps += traj.size();
      costs.push_back(c);
      cum_cost += c;
    }
    try {
      for (int u = 0; u < cfg.updates_per_round; ++u) {
        const Batch batch = buffer.sample(static_cast<std::size_t>(cfg.batch_size), spec.action_space, rng);
        const double lq = sac_q_update(batch, nets, cfg, rng);
        const double lqc = sac_qc_update(batch, nets, cfg, rng);
        const double lp = sac_policy_update(batch, nets, res.controller.lambda(), cfg, rng);
        approx::soft_update(nets.q_target, nets.q.params, cfg.tau);
        approx::soft_update(nets.qc_target, nets.qc.params, cfg.tau);
        if (!std::isfinite(lq) || !std::isfinite(lqc) || !std::isfinite(lp)) throw DivergenceError("non-finite loss");
      }
    } catch (const DivergenceError& e) {
      throw DivergenceError("finetune diverged at round " + std::to_string(step) + " (lambda " +
                            format_double(res.controller.lambda()) + "): " + e.what());
    }
    const lagrange::TraceRow tr = res.controller.tick(costs, spec.cost_threshold);
    res.trace.push_back(tr);
    if (step % cfg.eval_every == 0 || step == cfg.total_steps) log_row(step, &tr);
    if (hook) hook(step, nets);
  }
  return res;
}

}  // namespace o2o::online
