#include "o2o/offline/cpq.hpp"

#include "o2o/approx/optim.hpp"

#include <cmath>

namespace o2o::offline {

using approx::Batch;
using approx::DifferentiableNet;

void CpqConfig::validate() const {
  if (psi < 0.0) throw ConfigError("cpq.psi must be >= 0");
  if (l < 0.0) throw ConfigError("cpq.l must be >= 0");
  if (batch_size < 1 || ood_batch_size < 1) throw ConfigError("cpq batch sizes must be positive");
  if (update_count < 0) throw ConfigError("cpq.updates must be >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
}

double cpq_qc_loss(const DifferentiableNet& qc, const Batch& batch, const Vec& targets, const Mat& ood_inputs,
                   double psi, Vec* grad) {
  double loss = approx::mse_loss(qc, batch.inputs, targets, grad);
  if (psi != 0.0 && ood_inputs.cols() > 0) loss -= psi * approx::mean_output(qc, ood_inputs, grad, -psi);
  return loss;
}

Vec cpq_qc_targets(const Batch& batch, const DifferentiableNet& qc_target, const approx::StochasticPolicy& policy,
                   const CpqConfig& cfg, Rng& rng) {
  approx::NextValueSpec spec;
  spec.value = &qc_target;
  spec.samples = cfg.next_samples;
  return approx::bellman_targets(batch.c, batch.done, approx::expected_next_value(policy, batch.s2, spec, rng),
                                 cfg.gamma);
}

Vec cpq_q_targets(const Batch& batch, const DifferentiableNet& q_boot, const DifferentiableNet& qc,
                  const approx::StochasticPolicy& policy, const CpqConfig& cfg, Rng& rng) {
  approx::NextValueSpec spec;
  spec.value = &q_boot;
  spec.gate_net = &qc;
  spec.gate_threshold = cfg.l;
  spec.samples = cfg.next_samples;
  return approx::bellman_targets(batch.r, batch.done, approx::expected_next_value(policy, batch.s2, spec, rng),
                                 cfg.gamma);
}

approx::PolicyLoss cpq_policy_loss(const approx::StochasticPolicy& policy, const Mat& observations,
                                   const DifferentiableNet& q, const DifferentiableNet& qc, const CpqConfig& cfg,
                                   const Mat& noise, bool want_grad) {
  approx::ActionObjective obj;
  obj.terms.push_back({&q, -1.0});
  obj.gate_net = &qc;
  obj.gate_threshold = cfg.l;
  obj.entropy_weight = cfg.policy_entropy;
  return approx::policy_objective(policy, observations, obj, noise, want_grad);
}

double cpq_update_qc(const Batch& batch, approx::AgentNets& nets, const Mat& ood_inputs, const CpqConfig& cfg,
                     Rng& rng) {
  const DifferentiableNet target = nets.qc_target_net();
  const Vec y = cpq_qc_targets(batch, target, nets.policy, cfg, rng);
  Vec grad = Vec::Zero(nets.qc.params.size());
  const double loss = cpq_qc_loss(nets.qc, batch, y, ood_inputs, cfg.psi, &grad);
  nets.qc_opt.step(nets.qc.params, grad, "cost critic");
  return loss;
}

double cpq_update_q(const Batch& batch, approx::AgentNets& nets, const CpqConfig& cfg, Rng& rng) {
  const DifferentiableNet target = nets.q_target_net();
  const Vec y = cpq_q_targets(batch, target, nets.qc, nets.policy, cfg, rng);
  Vec grad = Vec::Zero(nets.q.params.size());
  const double loss = approx::mse_loss(nets.q, batch.inputs, y, &grad);
  nets.q_opt.step(nets.q.params, grad, "reward critic");
  return loss;
}

approx::PolicyLoss cpq_update_policy(const Batch& batch, approx::AgentNets& nets, const CpqConfig& cfg, Rng& rng) {
  Mat noise;
  if (nets.policy.head() == approx::HeadKind::SquashedGaussian)
    noise = approx::gaussian_noise(nets.policy.action_dim(), static_cast<int>(batch.size()), rng);
  approx::PolicyLoss loss = cpq_policy_loss(nets.policy, batch.s, nets.q, nets.qc, cfg, noise, true);
  if (!loss.grad.isZero(0.0)) nets.policy_opt.step(nets.policy.params(), loss.grad, "policy");
  return loss;
}

PretrainResult pretrain(const OfflineDataset& data, const cmdp::EnvSpec& spec, const CpqConfig& cfg,
                        std::uint64_t seed) {
  cfg.validate();
  if (data.size() == 0) throw BoundsError("pretrain: empty dataset");
  Rng init_rng(derive_seed(seed, 10));
  PretrainResult res;
  res.nets = approx::AgentNets::create(spec.obs_dim, spec.action_space, cfg.hidden, init_rng, cfg.policy_lr,
                                       cfg.q_lr, cfg.qc_lr);
  if (cfg.update_count == 0) return res;

  const OodSampler sampler(data, spec.action_space, cfg.ood_k, cfg.ood_quantile, 2000, derive_seed(seed, 11));
  Rng pool_rng(derive_seed(seed, 12));
  const OodPool pool = build_ood_pool(sampler, data, cfg.ood_pool_states, cfg.ood_per_state, pool_rng);
  const Mat pool_inputs = approx::critic_inputs(spec.action_space, pool.states, pool.actions);
  res.ood_threshold = sampler.threshold();
  res.ood_warning_fraction = pool.warning_fraction;

  Rng rng(derive_seed(seed, 13));
  auto& nets = res.nets;
  Mat ood_inputs(pool_inputs.rows(), cfg.ood_batch_size);
  for (long step = 0; step < cfg.update_count; ++step) {
    try {
      const Batch batch = approx::make_batch(
          data.transitions, approx::sample_indices(data.size(), static_cast<std::size_t>(cfg.batch_size), rng),
          spec.action_space);
      const auto ood_idx =
          approx::sample_indices(static_cast<std::size_t>(pool_inputs.cols()), ood_inputs.cols(), rng);
      for (Eigen::Index j = 0; j < ood_inputs.cols(); ++j)
        ood_inputs.col(j) = pool_inputs.col(static_cast<Eigen::Index>(ood_idx[static_cast<std::size_t>(j)]));
      CpqStepStats st;
      st.qc_loss = cpq_update_qc(batch, nets, ood_inputs, cfg, rng);
      st.q_loss = cpq_update_q(batch, nets, cfg, rng);
      const auto pl = cpq_update_policy(batch, nets, cfg, rng);
      st.policy_loss = pl.value;
      st.gate_open_fraction = pl.gate_open_fraction;
      approx::soft_update(nets.q_target, nets.q.params, cfg.tau);
      approx::soft_update(nets.qc_target, nets.qc.params, cfg.tau);
      if (!std::isfinite(st.qc_loss) || !std::isfinite(st.q_loss) || !std::isfinite(st.policy_loss))
        throw DivergenceError("non-finite loss");
      res.history.push_back(st);
    } catch (const DivergenceError& e) {
      throw DivergenceError("pretrain diverged at step " + std::to_string(step) + ": " + e.what());
    }
  }
  return res;
}

}  // namespace o2o::offline
