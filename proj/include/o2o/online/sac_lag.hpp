#pragma once

#include "o2o/approx/checkpoint.hpp"
#include "o2o/approx/critic.hpp"
#include "o2o/lagrange/controllers.hpp"

#include <deque>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace o2o::online {

/// FIFO ring buffer of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1000000);

  void add(const cmdp::Transition& t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t insertions() const { return insertions_; }
  /// i-th oldest transition still stored.
  const cmdp::Transition& at(std::size_t i) const;
  /// Batch drawn uniformly with replacement from the current contents.
  approx::Batch sample(std::size_t count, const cmdp::ActionSpace& space, Rng& rng) const;

 private:
  std::vector<cmdp::Transition> data_;
  std::size_t capacity_;
  std::size_t head_ = 0;  // slot of the oldest entry once full
  std::size_t insertions_ = 0;
};

enum class InitMode { WarmStart, FromScratch };
std::string to_string(InitMode m);
InitMode init_mode_from_string(const std::string& name);

struct SacLagConfig {
  double alpha = 5e-3;
  int batch_size = 256;
  double gamma = 0.99;
  double tau = 5e-2;
  double policy_lr = 5e-5;
  double q_lr = 3e-5;
  double qc_lr = 8e-5;
  int episodes_per_update = 3;
  long total_steps = 100;
  /// Gradient updates of each network per round.
  int updates_per_round = 1;
  std::size_t buffer_capacity = 1000000;
  int next_samples = 1;
  int eval_episodes = 5;
  /// Evaluate (and log a metrics row) every this many rounds; step 0 is
  /// always evaluated.
  long eval_every = 1;
  InitMode init = InitMode::WarmStart;
  std::vector<int> hidden{64, 64};

  void validate() const;
};

/// y = r + gamma (1 - done) E_{a'~pi}[Q_target(s',a') - alpha log pi(a'|s')]
Vec sac_q_targets(const approx::Batch& batch, const approx::StochasticPolicy& policy,
                  const approx::DifferentiableNet& q_target, const SacLagConfig& cfg, Rng& rng);
/// y_c = c + gamma (1 - done) E_{a'~pi}[Qc_target(s',a')]
Vec sac_qc_targets(const approx::Batch& batch, const approx::StochasticPolicy& policy,
                   const approx::DifferentiableNet& qc_target, const SacLagConfig& cfg, Rng& rng);
/// E_s E_{a~pi}[alpha log pi - Q + lambda Qc]
approx::PolicyLoss sac_policy_loss(const approx::StochasticPolicy& policy, const Mat& observations,
                                   const approx::DifferentiableNet& q, const approx::DifferentiableNet& qc,
                                   double lambda, double alpha, const Mat& noise, bool want_grad);

/// One optimizer step each; target networks are soft-updated by the caller.
double sac_q_update(const approx::Batch& batch, approx::AgentNets& nets, const SacLagConfig& cfg, Rng& rng);
double sac_qc_update(const approx::Batch& batch, approx::AgentNets& nets, const SacLagConfig& cfg, Rng& rng);
double sac_policy_update(const approx::Batch& batch, approx::AgentNets& nets, double lambda, const SacLagConfig& cfg,
                         Rng& rng);

struct EvalResult {
  double mean_return = 0.0;
  double mean_cost = 0.0;
  std::vector<double> returns;
  std::vector<double> costs;
};

/// Deterministic-mode episodes; undiscounted sums. Episode i uses
/// derive_seed(seed, i).
EvalResult evaluate_policy(const approx::StochasticPolicy& policy, const cmdp::Environment& env, int n_episodes,
                           std::uint64_t seed);

struct MetricsRow {
  long step = 0;
  double eval_return = 0.0;
  double eval_cost = 0.0;
  double lambda = 0.0;
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double err = 0.0;
  double cum_env_cost = 0.0;
  double max_return_so_far = 0.0;
};

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRow& row);
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
/// ParseError on a header that does not match the schema.
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

struct FinetuneResult {
  approx::AgentNets nets;
  lagrange::Controller controller;
  std::vector<MetricsRow> metrics;
  std::vector<lagrange::TraceRow> trace;
  std::size_t env_steps = 0;
};

/// Called after every round with (round, nets); used for periodic checkpoints.
using RoundHook = std::function<void(long, const approx::AgentNets&)>;

/// Online SAC-lag. Each round: roll out episodes_per_update stochastic
/// episodes into an initially empty buffer, run updates_per_round rounds of
/// (Q, Qc, policy, soft target) updates with the current lambda, then feed
/// the round's undiscounted episode costs to the controller.
FinetuneResult finetune_loop(const cmdp::Environment& env, approx::AgentNets init, lagrange::Controller controller,
                             const SacLagConfig& cfg, std::uint64_t seed, const RoundHook& hook = {});

}  // namespace o2o::online
