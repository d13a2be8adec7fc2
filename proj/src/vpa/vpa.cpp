#include "o2o/vpa/vpa.hpp"

#include "o2o/approx/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace o2o::vpa {

using approx::Batch;
using approx::DifferentiableNet;

void VpaConfig::validate() const {
  if (alpha < 0.0 || alpha_c < 0.0) throw ConfigError("vpa entropy coefficients must be >= 0");
  if (step_count < 0) throw ConfigError("vpa.steps must be >= 0");
  if (batch_size < 1) throw ConfigError("vpa.batch_size must be positive");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("vpa.tau must lie in [0, 1]");
}

namespace {

Vec entropy_targets(const Vec& x, const Batch& batch, const approx::StochasticPolicy& policy,
                    const DifferentiableNet& target, double coef, double gamma, int samples, Rng& rng) {
  approx::NextValueSpec spec;
  spec.value = &target;
  spec.entropy_weight = coef;
  spec.samples = samples;
  return approx::bellman_targets(x, batch.done, approx::expected_next_value(policy, batch.s2, spec, rng), gamma);
}

Batch single(const cmdp::Transition& t, const approx::StochasticPolicy& policy) {
  return approx::make_batch({t}, {0}, policy.action_space());
}

}  // namespace

Vec vpa_q_targets(const Batch& batch, const approx::StochasticPolicy& policy, const DifferentiableNet& q_target,
                  double alpha, double gamma, int samples, Rng& rng) {
  return entropy_targets(batch.r, batch, policy, q_target, alpha, gamma, samples, rng);
}

Vec vpa_qc_targets(const Batch& batch, const approx::StochasticPolicy& policy, const DifferentiableNet& qc_target,
                   double alpha_c, double gamma, int samples, Rng& rng) {
  return entropy_targets(batch.c, batch, policy, qc_target, alpha_c, gamma, samples, rng);
}

double vpa_q_target(const cmdp::Transition& t, const approx::StochasticPolicy& policy,
                    const DifferentiableNet& q_target, double alpha, double gamma, int samples, Rng& rng) {
  return vpa_q_targets(single(t, policy), policy, q_target, alpha, gamma, samples, rng)(0);
}

double vpa_qc_target(const cmdp::Transition& t, const approx::StochasticPolicy& policy,
                     const DifferentiableNet& qc_target, double alpha_c, double gamma, int samples, Rng& rng) {
  return vpa_qc_targets(single(t, policy), policy, qc_target, alpha_c, gamma, samples, rng)(0);
}

std::vector<VpaStepStats> vpa_run(const offline::OfflineDataset& data, approx::AgentNets& nets, const VpaConfig& cfg,
                                  std::uint64_t seed) {
  cfg.validate();
  std::vector<VpaStepStats> history;
  if (cfg.step_count == 0) return history;
  if (data.size() == 0) throw BoundsError("vpa: empty dataset");
  nets.q_opt = approx::Adam(nets.q.params.size(), cfg.q_lr);
  nets.qc_opt = approx::Adam(nets.qc.params.size(), cfg.qc_lr);
  Rng rng(derive_seed(seed, 20));
  const auto& space = nets.policy.action_space();
  for (long step = 0; step < cfg.step_count; ++step) {
    const Batch batch =
        approx::make_batch(data.transitions, approx::sample_indices(data.size(), cfg.batch_size, rng), space);
    const Vec y = vpa_q_targets(batch, nets.policy, nets.q_target_net(), cfg.alpha, cfg.gamma, cfg.next_samples, rng);
    const Vec yc =
        vpa_qc_targets(batch, nets.policy, nets.qc_target_net(), cfg.alpha_c, cfg.gamma, cfg.next_samples, rng);
    VpaStepStats st;
    Vec g = Vec::Zero(nets.q.params.size());
    st.q_loss = approx::mse_loss(nets.q, batch.inputs, y, &g);
    Vec gc = Vec::Zero(nets.qc.params.size());
    st.qc_loss = approx::mse_loss(nets.qc, batch.inputs, yc, &gc);
    try {
      nets.q_opt.step(nets.q.params, g, "reward critic");
      nets.qc_opt.step(nets.qc.params, gc, "cost critic");
    } catch (const DivergenceError& e) {
      throw DivergenceError("vpa diverged at step " + std::to_string(step) + ": " + e.what());
    }
    approx::soft_update(nets.q_target, nets.q.params, cfg.tau);
    approx::soft_update(nets.qc_target, nets.qc.params, cfg.tau);
    history.push_back(st);
  }
  return history;
}

std::vector<double> average_ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return xs[i] < xs[j]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw BoundsError("spearman_rho: lists differ in length");
  if (xs.size() < 2) throw BoundsError("spearman_rho: need at least two pairs");
  const auto rx = average_ranks(xs), ry = average_ranks(ys);
  const double mean = 0.5 * static_cast<double>(xs.size() + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

McEstimate mc_q_estimate(const cmdp::Policy& policy, const cmdp::Environment& env, const Vec& s, const Vec& a,
                         double gamma, int n_rollouts, std::uint64_t seed) {
  if (n_rollouts < 1) throw BoundsError("mc_q_estimate: need at least one rollout");
  auto sim = env.clone();
  std::vector<double> qs, qcs;
  for (int i = 0; i < n_rollouts; ++i) {
    const std::uint64_t rs = derive_seed(seed, static_cast<std::uint64_t>(i));
    Rng policy_rng(derive_seed(rs, 1));
    sim->reset_to(s, derive_seed(rs, 0));
    double q = 0.0, qc = 0.0, disc = 1.0;
    cmdp::StepResult step = sim->step(a);
    while (true) {
      q += disc * step.reward;
      qc += disc * step.cost;
      if (step.done) break;
      disc *= gamma;
      step = sim->step(policy.act(step.observation, policy_rng));
    }
    qs.push_back(q);
    qcs.push_back(qc);
  }
  auto stats = [](const std::vector<double>& v, double& mean, double& se) {
    mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) {
      se = 0.0;
      return;
    }
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  };
  McEstimate est;
  stats(qs, est.q, est.q_stderr);
  stats(qcs, est.qc, est.qc_stderr);
  return est;
}

std::string to_string(ProbeMode m) { return m == ProbeMode::Dataset ? "dataset" : "random"; }

ProbeSet make_probes(const cmdp::Policy& policy, const cmdp::Environment& env, const offline::OfflineDataset* data,
                     ProbeMode mode, int count, int rollouts, std::uint64_t seed) {
  if (count < 2) throw BoundsError("alignment probes: need at least two pairs");
  if (mode == ProbeMode::Dataset && (data == nullptr || data->size() == 0))
    throw BoundsError("alignment probes: dataset mode needs a dataset");
  const auto& space = env.spec().action_space;
  ProbeSet p;
  p.mode = mode;
  p.rollouts = rollouts;
  p.s.resize(env.spec().obs_dim, count);
  p.a.resize(space.dim(), count);
  p.true_q.resize(count);
  p.true_qc.resize(count);
  Rng rng(derive_seed(seed, 30));
  for (int i = 0; i < count; ++i) {
    if (mode == ProbeMode::Dataset) {
      const auto& t = data->transitions[std::uniform_int_distribution<std::size_t>(0, data->size() - 1)(rng)];
      p.s.col(i) = t.s;
      p.a.col(i) = t.a;
    } else {
      p.s.col(i) = env.random_observation(rng);
      p.a.col(i) = space.sample_uniform(rng);
    }
    const McEstimate est = mc_q_estimate(policy, env, p.s.col(i), p.a.col(i), env.spec().gamma, rollouts,
                                         derive_seed(seed, 1000 + static_cast<std::uint64_t>(i)));
    p.true_q(i) = est.q;
    p.true_qc(i) = est.qc;
  }
  return p;
}

RankScore score_probes(const ProbeSet& probes, const cmdp::ActionSpace& space, const DifferentiableNet& q,
                       const DifferentiableNet& qc) {
  const Mat x = approx::critic_inputs(space, probes.s, probes.a);
  const Vec pq = q.forward_batch(x).row(0).transpose();
  const Vec pqc = qc.forward_batch(x).row(0).transpose();
  auto as_list = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  RankScore r;
  r.degenerate_q = pq.maxCoeff() == pq.minCoeff();
  r.degenerate_qc = pqc.maxCoeff() == pqc.minCoeff();
  r.rho_q = spearman_rho(as_list(pq), as_list(probes.true_q));
  r.rho_qc = spearman_rho(as_list(pqc), as_list(probes.true_qc));
  return r;
}

AlignmentReport alignment_report(const ProbeSet& probes, const cmdp::ActionSpace& space,
                                 const approx::AgentNets& before, const approx::AgentNets& after) {
  AlignmentReport rep;
  rep.mode = probes.mode;
  rep.rollouts = probes.rollouts;
  rep.probes = static_cast<int>(probes.s.cols());
  rep.before = score_probes(probes, space, before.q, before.qc);
  rep.after = score_probes(probes, space, after.q, after.qc);
  return rep;
}

void write_alignment_csv(std::ostream& out, const std::vector<AlignmentReport>& reports, const std::string& env_name) {
  out << "env,mode,probes,rollouts,rho_q_before,rho_q_after,rho_qc_before,rho_qc_after,degenerate\n";
  for (const auto& r : reports) {
    const bool degenerate =
        r.before.degenerate_q || r.before.degenerate_qc || r.after.degenerate_q || r.after.degenerate_qc;
    out << env_name << ',' << to_string(r.mode) << ',' << r.probes << ',' << r.rollouts << ','
        << format_double(r.before.rho_q) << ',' << format_double(r.after.rho_q) << ','
        << format_double(r.before.rho_qc) << ',' << format_double(r.after.rho_qc) << ',' << (degenerate ? 1 : 0)
        << '\n';
  }
}

std::string format_alignment_table(const std::vector<AlignmentReport>& reports, const std::string& env_name) {
  const AlignmentReport* by_mode[2] = {nullptr, nullptr};
  for (const auto& r : reports) by_mode[r.mode == ProbeMode::Random ? 0 : 1] = &r;
  auto cell = [&](int mode, bool q, bool after) -> std::string {
    const AlignmentReport* r = by_mode[mode];
    if (!r) return "-";
    const RankScore& s = after ? r->after : r->before;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", q ? s.rho_q : s.rho_qc);
    return buf;
  };
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %-4s %-7s %10s %10s\n", "Env", "Net", "VPA", "random", "dataset");
  out += line;
  for (int net = 0; net < 2; ++net)
    for (int phase = 0; phase < 2; ++phase) {
      const bool q = net == 0, after = phase == 1;
      std::snprintf(line, sizeof line, "%-12s %-4s %-7s %10s %10s\n", env_name.c_str(), q ? "Q" : "Qc",
                    after ? "after" : "before", cell(0, q, after).c_str(), cell(1, q, after).c_str());
      out += line;
    }
  return out;
}

}  // namespace o2o::vpa

namespace o2o::vpa {

oracle::TabularPolicy tabulate_policy(const approx::StochasticPolicy& policy, const cmdp::GridCircleWorld& world) {
  const int n = world.num_cells();
  Mat obs = Mat::Identity(n, n);
  return policy.probabilities(obs).transpose();
}

Mat tabulate_critic(const DifferentiableNet& critic, const cmdp::GridCircleWorld& world) {
  const int n = world.num_cells();
  const int na = cmdp::GridCircleWorld::kNumActions;
  Mat obs(n, n * na), act(1, n * na);
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < na; ++a) {
      obs.col(s * na + a) = world.observation_of(s);
      act(0, s * na + a) = a;
    }
  const Vec out = critic.forward_batch(approx::critic_inputs(world.spec().action_space, obs, act)).row(0).transpose();
  Mat table(n, na);
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < na; ++a) table(s, a) = out(s * na + a);
  return table;
}

OracleGap oracle_gap(const approx::AgentNets& nets, const cmdp::GridCircleWorld& world,
                     const offline::OfflineDataset& data) {
  const auto tab = world.to_tabular();
  const auto pi = tabulate_policy(nets.policy, world);
  const Mat q_true = oracle::policy_eval_exact(tab, pi, Channel::Reward).q;
  const Mat qc_true = oracle::policy_eval_exact(tab, pi, Channel::Cost).q;
  const Mat q_net = tabulate_critic(nets.q, world);
  const Mat qc_net = tabulate_critic(nets.qc, world);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(q_true.rows(), q_true.cols(), false);
  std::vector<bool> visited(static_cast<std::size_t>(q_true.rows()), false);
  OracleGap g;
  for (const auto& t : data.transitions) {
    const int s = world.cell_from_observation(t.s), a = static_cast<int>(t.a(0));
    seen(s, a) = true;
    visited[static_cast<std::size_t>(s)] = true;
    g.q_mae_weighted += std::abs(q_net(s, a) - q_true(s, a));
    g.qc_mae_weighted += std::abs(qc_net(s, a) - qc_true(s, a));
  }
  if (!data.transitions.empty()) {
    g.q_mae_weighted /= static_cast<double>(data.size());
    g.qc_mae_weighted /= static_cast<double>(data.size());
  }
  for (Eigen::Index s = 0; s < q_true.rows(); ++s)
    for (Eigen::Index a = 0; a < q_true.cols(); ++a) {
      if (seen(s, a)) {
        ++g.in_pairs;
        g.q_mae += std::abs(q_net(s, a) - q_true(s, a));
        g.qc_mae += std::abs(qc_net(s, a) - qc_true(s, a));
        g.qc_in_signed += qc_net(s, a) - qc_true(s, a);
      } else if (visited[static_cast<std::size_t>(s)]) {
        ++g.ood_pairs;
        g.q_ood_signed += q_net(s, a) - q_true(s, a);
        g.qc_ood_signed += qc_net(s, a) - qc_true(s, a);
      }
    }
  if (g.in_pairs) {
    g.q_mae /= static_cast<double>(g.in_pairs);
    g.qc_mae /= static_cast<double>(g.in_pairs);
    g.qc_in_signed /= static_cast<double>(g.in_pairs);
  }
  if (g.ood_pairs) {
    g.q_ood_signed /= static_cast<double>(g.ood_pairs);
    g.qc_ood_signed /= static_cast<double>(g.ood_pairs);
  }
  return g;
}

}  // namespace o2o::vpa
