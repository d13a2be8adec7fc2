#pragma once

#include "o2o/approx/checkpoint.hpp"
#include "o2o/approx/critic.hpp"
#include "o2o/offline/ood.hpp"

namespace o2o::offline {

struct CpqConfig {
  double psi = 1.0;
  /// Indicator threshold l on Qc, in discounted cost units.
  double l = 1.0;
  double gamma = 0.99;
  double tau = 5e-2;
  int batch_size = 256;
  int ood_batch_size = 256;
  long update_count = 2000;
  double policy_lr = 5e-5;
  double q_lr = 3e-5;
  double qc_lr = 8e-5;
  /// Sampled next actions per transition (0 = exact for softmax heads).
  int next_samples = 1;
  /// OOD pool: dataset states and actions per state.
  std::size_t ood_pool_states = 512;
  int ood_per_state = 4;
  int ood_k = 5;
  double ood_quantile = 0.95;
  std::vector<int> hidden{64, 64};
  /// Entropy weight in the actor objective (0 = plain masked Q ascent).
  double policy_entropy = 0.0;

  void validate() const;
};

/// L = mean (Qc(s,a) - y_c)^2 - psi * mean Qc(s_ood, a_ood).
double cpq_qc_loss(const approx::DifferentiableNet& qc, const approx::Batch& batch, const Vec& targets,
                   const Mat& ood_inputs, double psi, Vec* grad);

/// y_c = c + gamma (1 - done) E_{a'~pi}[Qc_target(s', a')].
Vec cpq_qc_targets(const approx::Batch& batch, const approx::DifferentiableNet& qc_target,
                   const approx::StochasticPolicy& policy, const CpqConfig& cfg, Rng& rng);

/// y = r + gamma (1 - done) E_{a'~pi}[1{Qc(s',a') < l} Q_boot(s', a')]; the
/// mask is a stop-gradient.
Vec cpq_q_targets(const approx::Batch& batch, const approx::DifferentiableNet& q_boot,
                  const approx::DifferentiableNet& qc, const approx::StochasticPolicy& policy, const CpqConfig& cfg,
                  Rng& rng);

/// Actor loss -E_{s, a~pi}[1{Qc(s,a) < l} Q(s,a)] (+ entropy term when configured).
approx::PolicyLoss cpq_policy_loss(const approx::StochasticPolicy& policy, const Mat& observations,
                                   const approx::DifferentiableNet& q, const approx::DifferentiableNet& qc,
                                   const CpqConfig& cfg, const Mat& noise, bool want_grad);

struct CpqStepStats {
  double qc_loss = 0.0;
  double q_loss = 0.0;
  double policy_loss = 0.0;
  double gate_open_fraction = 0.0;
};

/// One gradient step on each network. The Q bootstrap uses the target
/// reward critic; the cost bootstrap uses the target cost critic.
double cpq_update_qc(const approx::Batch& batch, approx::AgentNets& nets, const Mat& ood_inputs,
                     const CpqConfig& cfg, Rng& rng);
double cpq_update_q(const approx::Batch& batch, approx::AgentNets& nets, const CpqConfig& cfg, Rng& rng);
/// Skips the optimizer step when the gradient is exactly zero (every action
/// masked), leaving the policy and its optimizer state unchanged.
approx::PolicyLoss cpq_update_policy(const approx::Batch& batch, approx::AgentNets& nets, const CpqConfig& cfg,
                                     Rng& rng);

struct PretrainResult {
  approx::AgentNets nets;
  std::vector<CpqStepStats> history;
  double ood_threshold = 0.0;
  double ood_warning_fraction = 0.0;
};

/// Fits the OOD sampler, then runs cfg.update_count rounds of
/// (Qc, Q, policy) updates followed by soft target updates.
PretrainResult pretrain(const OfflineDataset& data, const cmdp::EnvSpec& spec, const CpqConfig& cfg,
                        std::uint64_t seed);

}  // namespace o2o::offline
