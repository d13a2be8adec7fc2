#pragma once

#include "o2o/approx/checkpoint.hpp"
#include "o2o/approx/critic.hpp"
#include "o2o/cmdp/grid_circle.hpp"
#include "o2o/offline/dataset.hpp"
#include "o2o/oracle/solvers.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace o2o::vpa {

struct VpaConfig {
  double alpha = 1e-3;    // reward channel entropy coefficient
  double alpha_c = 5e-4;  // cost channel entropy coefficient
  long step_count = 2000;
  int batch_size = 256;
  double tau = 5e-2;
  double gamma = 0.99;
  /// Sampled next actions per transition (0 = exact for softmax heads).
  int next_samples = 1;
  double q_lr = 3e-5;
  double qc_lr = 8e-5;

  void validate() const;
};

/// r + gamma (1 - done) E_{a'~pi}[Q_target(s',a') - alpha log pi(a'|s')]
Vec vpa_q_targets(const approx::Batch& batch, const approx::StochasticPolicy& policy,
                  const approx::DifferentiableNet& q_target, double alpha, double gamma, int samples, Rng& rng);
/// c + gamma (1 - done) E_{a'~pi}[Qc_target(s',a') - alpha_c log pi(a'|s')]
Vec vpa_qc_targets(const approx::Batch& batch, const approx::StochasticPolicy& policy,
                   const approx::DifferentiableNet& qc_target, double alpha_c, double gamma, int samples, Rng& rng);

double vpa_q_target(const cmdp::Transition& t, const approx::StochasticPolicy& policy,
                    const approx::DifferentiableNet& q_target, double alpha, double gamma, int samples, Rng& rng);
double vpa_qc_target(const cmdp::Transition& t, const approx::StochasticPolicy& policy,
                     const approx::DifferentiableNet& qc_target, double alpha_c, double gamma, int samples, Rng& rng);

struct VpaStepStats {
  double q_loss = 0.0;
  double qc_loss = 0.0;
};

/// Regresses Q and Qc of `nets` toward the entropy-augmented targets of the
/// frozen policy, soft-updating both targets every step. Critic optimizers
/// restart with the VPA learning rates; the policy and its optimizer are not
/// touched.
std::vector<VpaStepStats> vpa_run(const offline::OfflineDataset& data, approx::AgentNets& nets,
                                  const VpaConfig& cfg, std::uint64_t seed);

/// Spearman rank correlation with average ranks for ties (Pearson correlation
/// of the rank vectors). Returns 0 when either list is constant.
double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys);
std::vector<double> average_ranks(const std::vector<double>& xs);

struct McEstimate {
  double q = 0.0;
  double qc = 0.0;
  double q_stderr = 0.0;
  double qc_stderr = 0.0;
};

/// Discounted reward and cost averaged over rollouts that start in the
/// state behind `s`, take `a` first and then follow `policy` until the
/// episode ends. Rollout i uses derive_seed(seed, i).
McEstimate mc_q_estimate(const cmdp::Policy& policy, const cmdp::Environment& env, const Vec& s, const Vec& a,
                         double gamma, int n_rollouts, std::uint64_t seed);

enum class ProbeMode { Dataset, Random };
std::string to_string(ProbeMode m);

struct ProbeSet {
  ProbeMode mode = ProbeMode::Dataset;
  Mat s;
  Mat a;
  Vec true_q;
  Vec true_qc;
  int rollouts = 10;
};

/// Dataset mode draws (s, a) pairs from the dataset; random mode draws
/// env.random_observation() with a uniform action.
ProbeSet make_probes(const cmdp::Policy& policy, const cmdp::Environment& env, const offline::OfflineDataset* data,
                     ProbeMode mode, int count, int rollouts, std::uint64_t seed);

struct RankScore {
  double rho_q = 0.0;
  double rho_qc = 0.0;
  bool degenerate_q = false;  // constant predictions
  bool degenerate_qc = false;
};

RankScore score_probes(const ProbeSet& probes, const cmdp::ActionSpace& space, const approx::DifferentiableNet& q,
                       const approx::DifferentiableNet& qc);

struct AlignmentReport {
  ProbeMode mode = ProbeMode::Dataset;
  int rollouts = 10;
  int probes = 0;
  RankScore before;
  RankScore after;
};

AlignmentReport alignment_report(const ProbeSet& probes, const cmdp::ActionSpace& space,
                                 const approx::AgentNets& before, const approx::AgentNets& after);

void write_alignment_csv(std::ostream& out, const std::vector<AlignmentReport>& reports, const std::string& env_name);
/// Text table with rows Q/Qc x before/after and one column per probe mode.
std::string format_alignment_table(const std::vector<AlignmentReport>& reports, const std::string& env_name);

/// Softmax policy tabulated on every grid cell (rows: cells).
oracle::TabularPolicy tabulate_policy(const approx::StochasticPolicy& policy, const cmdp::GridCircleWorld& world);

/// Network Q over all (cell, action) pairs as an S x A table.
Mat tabulate_critic(const approx::DifferentiableNet& critic, const cmdp::GridCircleWorld& world);

struct OracleGap {
  double q_mae = 0.0;   // over the distinct (s, a) pairs present in the dataset
  double qc_mae = 0.0;
  double q_mae_weighted = 0.0;   // over dataset transitions (pairs weighted by frequency)
  double qc_mae_weighted = 0.0;
  // mean network - exact over unseen actions at states the dataset visits
  double q_ood_signed = 0.0;
  double qc_ood_signed = 0.0;
  double qc_in_signed = 0.0;   // mean network - exact over dataset pairs
  std::size_t in_pairs = 0;
  std::size_t ood_pairs = 0;
};

/// Compares the critics with exact evaluation of the policy on the grid.
OracleGap oracle_gap(const approx::AgentNets& nets, const cmdp::GridCircleWorld& world,
                     const offline::OfflineDataset& data);

}  // namespace o2o::vpa
