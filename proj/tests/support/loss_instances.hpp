#pragma once

#include "gradcheck.hpp"

#include "o2o/offline/cpq.hpp"
#include "o2o/online/sac_lag.hpp"
#include "o2o/vpa/vpa.hpp"

#include <string>
#include <vector>

namespace o2o::testing {

/// A small random problem: agent networks with perturbed targets, a batch
/// of synthetic transitions and standard-normal policy noise.
struct LossInstance {
  cmdp::ActionSpace space;
  approx::AgentNets nets;
  approx::Batch batch;
  Mat ood_inputs;
  Mat noise;
};

inline LossInstance make_loss_instance(std::uint64_t seed) {
  Rng rng(seed);
  LossInstance inst;
  const int obs_dim = 2 + static_cast<int>(seed % 2);
  inst.space = (seed % 2 == 0) ? cmdp::ActionSpace::continuous(Vec::Constant(1 + seed % 3 / 2, -1.0),
                                                                Vec::Constant(1 + seed % 3 / 2, 1.0))
                               : cmdp::ActionSpace::discrete(3 + static_cast<int>(seed % 3));
  inst.nets = approx::AgentNets::create(obs_dim, inst.space, {5, 4}, rng, 1e-3, 1e-3, 1e-3);
  // Policy output layer starts scaled down; give it real weight so the
  // gradient checks see a non-trivial head.
  std::normal_distribution<double> n01(0.0, 1.0);
  for (Eigen::Index i = 0; i < inst.nets.policy.params().size(); ++i) inst.nets.policy.params()(i) += 0.3 * n01(rng);
  if (!inst.space.is_discrete()) inst.nets.policy.params().tail(inst.space.dim()).setConstant(-0.7);
  for (Eigen::Index i = 0; i < inst.nets.q_target.size(); ++i) inst.nets.q_target(i) += 0.2 * n01(rng);
  for (Eigen::Index i = 0; i < inst.nets.qc_target.size(); ++i) inst.nets.qc_target(i) += 0.2 * n01(rng);

  const int b = 6;
  std::vector<cmdp::Transition> data;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < b; ++i) {
    cmdp::Transition t;
    t.s = Vec(obs_dim);
    t.s_next = Vec(obs_dim);
    for (int d = 0; d < obs_dim; ++d) {
      t.s(d) = n01(rng);
      t.s_next(d) = n01(rng);
    }
    t.a = inst.space.sample_uniform(rng);
    t.r = u01(rng);
    t.c = u01(rng) < 0.4 ? 1.0 : 0.0;
    t.done = i == b - 1;
    data.push_back(t);
  }
  std::vector<std::size_t> idx(b);
  for (int i = 0; i < b; ++i) idx[i] = static_cast<std::size_t>(i);
  inst.batch = approx::make_batch(data, idx, inst.space);

  const int n_ood = 4;
  Mat ood_s(obs_dim, n_ood), ood_a(inst.space.dim(), n_ood);
  for (int j = 0; j < n_ood; ++j) {
    for (int d = 0; d < obs_dim; ++d) ood_s(d, j) = n01(rng);
    ood_a.col(j) = inst.space.sample_uniform(rng);
  }
  inst.ood_inputs = approx::critic_inputs(inst.space, ood_s, ood_a);
  inst.noise = approx::gaussian_noise(inst.space.dim(), b, rng);
  return inst;
}

struct NamedCheck {
  std::string loss;
  GradCheck result;
};

inline GradCheck check_mse(const approx::DifferentiableNet& net, const Mat& inputs, const Vec& targets) {
  Vec grad = Vec::Zero(net.params.size());
  approx::mse_loss(net, inputs, targets, &grad);
  auto f = [&](const Vec& p) { return approx::mse_loss(approx::DifferentiableNet(net.arch, p), inputs, targets, nullptr); };
  return check_gradient(f, net.params, grad);
}

inline GradCheck check_policy(const approx::StochasticPolicy& policy,
                              const std::function<approx::PolicyLoss(const approx::StochasticPolicy&, bool)>& loss) {
  const Vec grad = loss(policy, true).grad;
  auto f = [&](const Vec& p) {
    approx::StochasticPolicy copy = policy;
    copy.params() = p;
    return loss(copy, false).value;
  };
  return check_gradient(f, policy.params(), grad);
}

/// Every training loss of the library checked against central differences
/// on one random instance.
inline std::vector<NamedCheck> check_all_losses(std::uint64_t seed) {
  LossInstance inst = make_loss_instance(seed);
  auto& nets = inst.nets;
  const auto& batch = inst.batch;
  Rng rng(derive_seed(seed, 1));
  std::vector<NamedCheck> out;

  online::SacLagConfig sac;
  sac.alpha = 0.2;
  sac.gamma = 0.9;
  out.push_back({"sac_q", check_mse(nets.q, batch.inputs,
                                    online::sac_q_targets(batch, nets.policy, nets.q_target_net(), sac, rng))});
  out.push_back({"sac_qc", check_mse(nets.qc, batch.inputs,
                                     online::sac_qc_targets(batch, nets.policy, nets.qc_target_net(), sac, rng))});
  for (double lambda : {0.0, 1.7}) {
    auto loss = [&](const approx::StochasticPolicy& p, bool want) {
      return online::sac_policy_loss(p, batch.s, nets.q, nets.qc, lambda, sac.alpha, inst.noise, want);
    };
    out.push_back({lambda == 0.0 ? "sac_policy" : "sac_lag_policy", check_policy(nets.policy, loss)});
  }

  out.push_back({"vpa_q", check_mse(nets.q, batch.inputs,
                                    vpa::vpa_q_targets(batch, nets.policy, nets.q_target_net(), 0.3, 0.9, 2, rng))});
  out.push_back({"vpa_qc", check_mse(nets.qc, batch.inputs,
                                     vpa::vpa_qc_targets(batch, nets.policy, nets.qc_target_net(), 0.2, 0.9, 2, rng))});

  offline::CpqConfig cpq;
  cpq.gamma = 0.9;
  cpq.psi = 0.7;
  // Threshold at the median cost-critic output so the gate is mixed.
  Vec qc_out = nets.qc.forward_batch(batch.inputs).row(0).transpose();
  std::sort(qc_out.data(), qc_out.data() + qc_out.size());
  cpq.l = qc_out(qc_out.size() / 2);
  const Vec yc = offline::cpq_qc_targets(batch, nets.qc_target_net(), nets.policy, cpq, rng);
  {
    Vec grad = Vec::Zero(nets.qc.params.size());
    offline::cpq_qc_loss(nets.qc, batch, yc, inst.ood_inputs, cpq.psi, &grad);
    auto f = [&](const Vec& p) {
      return offline::cpq_qc_loss(approx::DifferentiableNet(nets.qc.arch, p), batch, yc, inst.ood_inputs, cpq.psi,
                                  nullptr);
    };
    out.push_back({"cpq_qc", check_gradient(f, nets.qc.params, grad)});
  }
  out.push_back({"cpq_q", check_mse(nets.q, batch.inputs,
                                    offline::cpq_q_targets(batch, nets.q_target_net(), nets.qc, nets.policy, cpq, rng))});
  {
    auto loss = [&](const approx::StochasticPolicy& p, bool want) {
      return offline::cpq_policy_loss(p, batch.s, nets.q, nets.qc, cpq, inst.noise, want);
    };
    out.push_back({"cpq_policy", check_policy(nets.policy, loss)});
  }
  return out;
}

}  // namespace o2o::testing
