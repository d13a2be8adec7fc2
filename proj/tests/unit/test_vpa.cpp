#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "../support/loss_instances.hpp"

#include "o2o/cmdp/grid_circle.hpp"
#include "o2o/vpa/vpa.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace o2o;
using namespace o2o::vpa;

namespace {

cmdp::Transition transition(int obs_dim, double r, double c, bool done = false) {
  cmdp::Transition t;
  t.s = Vec::Zero(obs_dim);
  t.s_next = Vec::Zero(obs_dim);
  t.s_next(0) = 1.0;
  t.a = Vec::Zero(1);
  t.r = r;
  t.c = c;
  t.done = done;
  return t;
}

// Policy with zero parameters (uniform softmax) and critics that output 0.
approx::AgentNets zero_nets(int obs_dim, int actions) {
  Rng rng(1);
  approx::AgentNets nets = approx::AgentNets::create(obs_dim, cmdp::ActionSpace::discrete(actions), {6}, rng, 1e-3,
                                                     1e-3, 1e-3);
  nets.policy.params().setZero();
  nets.q.params.setZero();
  nets.qc.params.setZero();
  nets.q_target.setZero();
  nets.qc_target.setZero();
  return nets;
}

// Pearson correlation of ranks, ranks by counting (rank = #less + (#equal + 1) / 2).
double naive_spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        if (w < v[i]) ++less;
        if (w == v[i]) ++equal;
      }
      r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
  };
  const auto rx = ranks(xs), ry = ranks(ys);
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) mx += rx[i] / n, my += ry[i] / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Critic over one-hot grid inputs that reproduces `table` exactly: one ReLU
// unit per (cell, action) fires only when both indicators are on.
approx::DifferentiableNet table_net(const Mat& table) {
  const int n = static_cast<int>(table.rows()), na = static_cast<int>(table.cols());
  const int in = n + na, hid = n * na;
  approx::Mlp arch({in, hid, 1}, approx::Activation::Relu);
  Vec p = Vec::Zero(arch.param_count());
  Eigen::Map<Mat> w1(p.data(), hid, in);
  Eigen::Map<Vec> b1(p.data() + hid * in, hid);
  Eigen::Map<Mat> w2(p.data() + hid * in + hid, 1, hid);
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < na; ++a) {
      const int u = s * na + a;
      w1(u, s) = 1.0;
      w1(u, n + a) = 1.0;
      b1(u) = -1.0;
      w2(0, u) = table(s, a);
    }
  return approx::DifferentiableNet(arch, p);
}

offline::OfflineDataset grid_dataset(const cmdp::GridCircleWorld& world, std::size_t n, std::uint64_t seed) {
  cmdp::GridRingPolicy ring(world);
  cmdp::UniformRandomPolicy rnd(world.spec().action_space);
  return offline::generate_dataset(world, {{&ring, 0.8, "ring"}, {&rnd, 0.2, "random"}}, n, seed);
}

std::string checkpoint_bytes(const approx::AgentNets& nets) {
  approx::Checkpoint ck;
  nets.store(ck);
  std::ostringstream out;
  approx::write_checkpoint(out, ck);
  return out.str();
}

}  // namespace

TEST_CASE("uniform policy over four actions: closed-form entropy targets") {
  approx::AgentNets nets = zero_nets(3, 4);
  for (int samples : {0, 1, 5}) {
    Rng rng(3);
    const double yq = vpa_q_target(transition(3, 1.0, 0.0), nets.policy, nets.q_target_net(), 1e-3, 0.99, samples, rng);
    const double yc = vpa_qc_target(transition(3, 1.0, 0.0), nets.policy, nets.qc_target_net(), 5e-4, 0.99, samples, rng);
    CHECK(yq == doctest::Approx(1.0013723).epsilon(1e-7));
    CHECK(std::abs(yq - (1.0 + 0.99 * 1e-3 * std::log(4.0))) <= 1e-12);
    CHECK(yc == doctest::Approx(6.8615e-4).epsilon(1e-4));
    CHECK(std::abs(yc - 0.99 * 5e-4 * std::log(4.0)) <= 1e-15);
    CHECK(yc > 0.0);
  }
}

TEST_CASE("gamma 0 and terminal transitions give the immediate signal") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    testing::LossInstance inst = testing::make_loss_instance(seed);
    Rng rng(seed);
    CHECK(vpa_q_targets(inst.batch, inst.nets.policy, inst.nets.q_target_net(), 0.3, 0.0, 1, rng) == inst.batch.r);
    CHECK(vpa_qc_targets(inst.batch, inst.nets.policy, inst.nets.qc_target_net(), 0.3, 0.0, 1, rng) == inst.batch.c);
    const Eigen::Index last = inst.batch.size() - 1;
    REQUIRE(inst.batch.done(last) == 1.0);
    CHECK(vpa_q_targets(inst.batch, inst.nets.policy, inst.nets.q_target_net(), 0.3, 0.9, 1, rng)(last) ==
          inst.batch.r(last));
  }
}

TEST_CASE("deterministic discrete policy: target is r + gamma Q(s', a*)") {
  approx::AgentNets nets = zero_nets(3, 4);
  Rng rng(5);
  nets.q_target = nets.q.arch.init_params(rng);
  nets.qc_target = nets.qc.arch.init_params(rng);
  nets.policy.params().tail(4) << 0.0, 0.0, 60.0, 0.0;  // output bias: action 2 dominates
  const cmdp::Transition t = transition(3, 0.4, 1.0);
  const Mat x = approx::critic_inputs(nets.policy.action_space(), Mat(t.s_next), Mat(Vec::Constant(1, 2.0)));
  const double q_next = nets.q_target_net().forward_batch(x)(0, 0);
  const double qc_next = nets.qc_target_net().forward_batch(x)(0, 0);
  for (int samples : {0, 1}) {
    CHECK(std::abs(vpa_q_target(t, nets.policy, nets.q_target_net(), 7.0, 0.9, samples, rng) - (0.4 + 0.9 * q_next)) <=
          1e-12);
    CHECK(std::abs(vpa_qc_target(t, nets.policy, nets.qc_target_net(), 7.0, 0.9, samples, rng) -
                   (1.0 + 0.9 * qc_next)) <= 1e-12);
  }
}

TEST_CASE("entropy coefficients weakly raise both targets on discrete policies") {
  for (std::uint64_t seed = 1; seed <= 11; seed += 2) {
    testing::LossInstance inst = testing::make_loss_instance(seed);
    Vec prev_q, prev_c;
    for (double coef : {0.0, 1e-4, 5e-4, 1e-3, 0.1, 1.0}) {
      Rng rng(1);
      const Vec yq = vpa_q_targets(inst.batch, inst.nets.policy, inst.nets.q_target_net(), coef, 0.99, 0, rng);
      const Vec yc = vpa_qc_targets(inst.batch, inst.nets.policy, inst.nets.qc_target_net(), coef, 0.99, 0, rng);
      if (prev_q.size()) {
        CHECK((yq - prev_q).minCoeff() >= -1e-15);
        CHECK((yc - prev_c).minCoeff() >= -1e-15);
      }
      prev_q = yq;
      prev_c = yc;
    }
  }
}

TEST_CASE("vpa_run: zero steps is a no-op and the policy stays frozen") {
  cmdp::GridCircleWorld world;
  const offline::OfflineDataset d = grid_dataset(world, 500, 1);
  Rng rng(2);
  const approx::AgentNets init =
      approx::AgentNets::create(world.spec().obs_dim, world.spec().action_space, {16}, rng, 1e-3, 1e-3, 1e-3);
  VpaConfig cfg;
  cfg.gamma = world.spec().gamma;
  cfg.batch_size = 32;

  approx::AgentNets same = init;
  cfg.step_count = 0;
  CHECK(vpa_run(d, same, cfg, 4).empty());
  CHECK(checkpoint_bytes(same) == checkpoint_bytes(init));

  approx::AgentNets moved = init;
  cfg.step_count = 40;
  const auto hist = vpa_run(d, moved, cfg, 4);
  CHECK(hist.size() == 40u);
  CHECK(moved.policy.params() == init.policy.params());
  CHECK(moved.policy_opt.m == init.policy_opt.m);
  CHECK(moved.policy_opt.step_count == init.policy_opt.step_count);
  CHECK(moved.q.params != init.q.params);
  CHECK(moved.qc.params != init.qc.params);
}

TEST_CASE("vpa_run is reproducible per seed") {
  cmdp::GridCircleWorld world;
  const offline::OfflineDataset d = grid_dataset(world, 500, 1);
  Rng rng(2);
  const approx::AgentNets init =
      approx::AgentNets::create(world.spec().obs_dim, world.spec().action_space, {16}, rng, 1e-3, 1e-3, 1e-3);
  VpaConfig cfg;
  cfg.step_count = 20;
  cfg.batch_size = 32;
  approx::AgentNets a = init, b = init, c = init;
  vpa_run(d, a, cfg, 9);
  vpa_run(d, b, cfg, 9);
  vpa_run(d, c, cfg, 10);
  CHECK(checkpoint_bytes(a) == checkpoint_bytes(b));
  CHECK(checkpoint_bytes(a) != checkpoint_bytes(c));
}

TEST_CASE("with zero entropy, a VPA step is a plain fitted-evaluation step") {
  cmdp::GridCircleWorld world;
  const offline::OfflineDataset d = grid_dataset(world, 400, 3);
  Rng rng(4);
  approx::AgentNets nets =
      approx::AgentNets::create(world.spec().obs_dim, world.spec().action_space, {12}, rng, 1e-3, 1e-3, 1e-3);
  nets.policy.params() += 0.5 * approx::gaussian_noise(static_cast<int>(nets.policy.params().size()), 1, rng);
  VpaConfig cfg;
  cfg.alpha = cfg.alpha_c = 0.0;
  cfg.step_count = 1;
  cfg.batch_size = 16;
  cfg.next_samples = 0;
  cfg.gamma = 0.9;

  // Fitted evaluation by hand: y = x + gamma (1 - done) sum_a' pi(a'|s') Q'(s', a').
  Rng draw(derive_seed(11, 20));
  const auto idx = approx::sample_indices(d.size(), 16, draw);
  const auto& space = world.spec().action_space;
  const approx::Batch b = approx::make_batch(d.transitions, idx, space);
  const Mat probs = nets.policy.probabilities(b.s2);
  auto fqe_step = [&](const approx::DifferentiableNet& net, const approx::DifferentiableNet& target, const Vec& x,
                      double lr) {
    Vec y = x;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      double next = 0.0;
      for (int a = 0; a < 5; ++a)
        next += probs(a, j) * target.forward_batch(approx::critic_inputs(space, Mat(b.s2.col(j)),
                                                                          Mat(Vec::Constant(1, a))))(0, 0);
      y(j) += 0.9 * (1.0 - b.done(j)) * next;
    }
    Vec g = Vec::Zero(net.params.size());
    approx::mse_loss(net, b.inputs, y, &g);
    Vec p = net.params;
    approx::Adam(p.size(), lr).step(p, g);
    return p;
  };
  const Vec q_expected = fqe_step(nets.q, nets.q_target_net(), b.r, cfg.q_lr);
  const Vec qc_expected = fqe_step(nets.qc, nets.qc_target_net(), b.c, cfg.qc_lr);

  vpa_run(d, nets, cfg, 11);
  CHECK((nets.q.params - q_expected).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((nets.qc.params - qc_expected).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("vpa config validation") {
  VpaConfig cfg;
  CHECK(cfg.alpha == 1e-3);
  CHECK(cfg.alpha_c == 5e-4);
  CHECK_NOTHROW(cfg.validate());
  cfg.alpha_c = -1e-9;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = VpaConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = VpaConfig{};
  cfg.step_count = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("vpa divergence names the step") {
  cmdp::GridCircleWorld world;
  offline::OfflineDataset d = grid_dataset(world, 50, 1);
  for (auto& t : d.transitions) t.c = std::numeric_limits<double>::infinity();
  Rng rng(1);
  approx::AgentNets nets =
      approx::AgentNets::create(world.spec().obs_dim, world.spec().action_space, {4}, rng, 1e-3, 1e-3, 1e-3);
  VpaConfig cfg;
  cfg.step_count = 3;
  try {
    vpa_run(d, nets, cfg, 1);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
}

TEST_CASE("spearman examples") {
  CHECK(spearman_rho({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(spearman_rho({3, 1, 2}, {3, 1, 2}) == 1.0);
  CHECK(spearman_rho({1, 2, 3, 4, 5}, {5, 4, 3, 2, 1}) == -1.0);
  CHECK(spearman_rho({1, 1, 2}, {1, 2, 3}) == doctest::Approx(1.5 / std::sqrt(3.0)).epsilon(1e-14));
  CHECK(spearman_rho({2, 2, 2}, {1, 2, 3}) == 0.0);
  CHECK_THROWS_AS(spearman_rho({1}, {1}), BoundsError);
  CHECK_THROWS_AS(spearman_rho({1, 2}, {1, 2, 3}), BoundsError);
}

TEST_CASE("spearman agrees with the textbook formula without ties and with a naive rank oracle with ties") {
  Rng rng(8);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_int_distribution<int> small(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 30;
    std::vector<double> x(n), y(n), tx(n), ty(n);
    for (int i = 0; i < n; ++i) x[i] = n01(rng), y[i] = n01(rng), tx[i] = small(rng), ty[i] = small(rng);
    const auto rx = average_ranks(x), ry = average_ranks(y);
    double d2 = 0.0;
    for (int i = 0; i < n; ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    const double textbook = 1.0 - 6.0 * d2 / (n * (static_cast<double>(n) * n - 1.0));
    CHECK(std::abs(spearman_rho(x, y) - textbook) <= 1e-12);
    const double rho = spearman_rho(tx, ty);
    CHECK(rho >= -1.0);
    CHECK(rho <= 1.0);
    const bool constant = std::adjacent_find(tx.begin(), tx.end(), std::not_equal_to<>()) == tx.end() ||
                          std::adjacent_find(ty.begin(), ty.end(), std::not_equal_to<>()) == ty.end();
    if (!constant) CHECK(std::abs(rho - naive_spearman(tx, ty)) <= 1e-12);
  }
}

TEST_CASE("spearman is invariant under strictly increasing transforms") {
  Rng rng(9);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(20), y(20), fx(20), gy(20);
    for (int i = 0; i < 20; ++i) {
      x[i] = n01(rng);
      y[i] = std::round(3.0 * n01(rng));  // with ties
      fx[i] = std::exp(3.0 * x[i]) - 7.0;
      gy[i] = y[i] * y[i] * y[i] + 2.0 * y[i];
    }
    CHECK(spearman_rho(fx, gy) == doctest::Approx(spearman_rho(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("mc estimate: deterministic system gives zero spread") {
  cmdp::GridCircleWorld::Params p;
  p.slip = 0.0;
  cmdp::GridCircleWorld world(p);
  cmdp::GridRingPolicy ring(world);
  const Vec s = world.observation_of(world.cell_of(1, 1));
  const Vec a = Vec::Constant(1, 1.0);
  const McEstimate one = mc_q_estimate(ring, world, s, a, 0.9, 1, 5);
  const McEstimate many = mc_q_estimate(ring, world, s, a, 0.9, 10, 6);
  CHECK(many.q == doctest::Approx(one.q).epsilon(1e-14));
  CHECK(many.qc == doctest::Approx(one.qc).epsilon(1e-14));
  CHECK(many.q_stderr <= 1e-14);
  CHECK(many.qc_stderr <= 1e-14);
  CHECK_THROWS_AS(mc_q_estimate(ring, world, s, a, 0.9, 0, 1), BoundsError);
}

TEST_CASE("mc estimate with gamma 0 is the immediate pair") {
  cmdp::GridCircleWorld world;
  cmdp::UniformRandomPolicy rnd(world.spec().action_space);
  for (int cell : {0, 8, 24}) {
    const McEstimate est = mc_q_estimate(rnd, world, world.observation_of(cell), Vec::Constant(1, 0.0), 0.0, 5, 1);
    CHECK(est.q == world.reward_of(cell, 0));
    CHECK(est.qc == world.cost_of(cell));
  }
}

TEST_CASE("mc estimate agrees with exact evaluation on the grid") {
  cmdp::GridCircleWorld world;
  const oracle::TabularCmdp tab = world.to_tabular();
  const oracle::TabularPolicy uniform = Mat::Constant(world.num_cells(), 5, 0.2);
  const Mat q = oracle::policy_eval_exact(tab, uniform, Channel::Reward).q;
  const Mat qc = oracle::policy_eval_exact(tab, uniform, Channel::Cost).q;
  cmdp::UniformRandomPolicy rnd(world.spec().action_space);

  const int s0 = world.cell_of(2, 1);
  const McEstimate big = mc_q_estimate(rnd, world, world.observation_of(s0), Vec::Constant(1, 2.0), tab.gamma, 10000, 3);
  CHECK(std::abs(big.q - q(s0, 2)) <= 3.0 * big.q_stderr);
  CHECK(std::abs(big.qc - qc(s0, 2)) <= 3.0 * big.qc_stderr);

  Rng rng(21);
  int within_q = 0, within_qc = 0;
  for (int i = 0; i < 20; ++i) {
    const int s = std::uniform_int_distribution<int>(0, world.num_cells() - 1)(rng);
    const int a = std::uniform_int_distribution<int>(0, 4)(rng);
    const McEstimate est = mc_q_estimate(rnd, world, world.observation_of(s), Vec::Constant(1, a), tab.gamma, 2000,
                                         derive_seed(40, i));
    within_q += std::abs(est.q - q(s, a)) <= 3.0 * est.q_stderr + 1e-12;
    within_qc += std::abs(est.qc - qc(s, a)) <= 3.0 * est.qc_stderr + 1e-12;
  }
  INFO("pairs within 3 SE: q " << within_q << ", qc " << within_qc);
  CHECK(within_q >= 19);
  CHECK(within_qc >= 19);
}

TEST_CASE("a critic that reproduces the Monte-Carlo values ranks perfectly") {
  cmdp::GridCircleWorld world;
  cmdp::GridRingPolicy ring(world);
  const offline::OfflineDataset d = grid_dataset(world, 2000, 5);
  ProbeSet probes = make_probes(ring, world, &d, ProbeMode::Dataset, 12, 10, 5);
  // Keep the first occurrence of each pair so the table is well defined.
  Mat tq = Mat::Zero(world.num_cells(), 5), tc = Mat::Zero(world.num_cells(), 5);
  for (Eigen::Index i = 0; i < probes.s.cols(); ++i) {
    const int s = world.cell_from_observation(probes.s.col(i)), a = static_cast<int>(probes.a(0, i));
    tq(s, a) = probes.true_q(i);
    tc(s, a) = probes.true_qc(i);
  }
  for (Eigen::Index i = 0; i < probes.s.cols(); ++i) {
    const int s = world.cell_from_observation(probes.s.col(i)), a = static_cast<int>(probes.a(0, i));
    probes.true_q(i) = tq(s, a);
    probes.true_qc(i) = tc(s, a);
  }
  const RankScore r = score_probes(probes, world.spec().action_space, table_net(tq), table_net(tc));
  CHECK(r.rho_q == doctest::Approx(1.0).epsilon(1e-12));
  const bool qc_constant = probes.true_qc.maxCoeff() == probes.true_qc.minCoeff();
  if (!qc_constant) CHECK(r.rho_qc == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(r.degenerate_q);
}

TEST_CASE("constant predictions are flagged and score 0") {
  cmdp::GridCircleWorld world;
  cmdp::UniformRandomPolicy rnd(world.spec().action_space);
  const ProbeSet probes = make_probes(rnd, world, nullptr, ProbeMode::Random, 8, 3, 2);
  const auto flat = table_net(Mat::Constant(world.num_cells(), 5, 1.5));
  const RankScore r = score_probes(probes, world.spec().action_space, flat, flat);
  CHECK(r.degenerate_q);
  CHECK(r.degenerate_qc);
  CHECK(r.rho_q == 0.0);
  CHECK(r.rho_qc == 0.0);
  CHECK_THROWS_AS(make_probes(rnd, world, nullptr, ProbeMode::Dataset, 8, 3, 2), BoundsError);
  CHECK_THROWS_AS(make_probes(rnd, world, nullptr, ProbeMode::Random, 1, 3, 2), BoundsError);
}

TEST_CASE("oracle gap is zero for a critic equal to exact evaluation") {
  cmdp::GridCircleWorld world;
  const offline::OfflineDataset d = grid_dataset(world, 3000, 6);
  Rng rng(3);
  approx::AgentNets nets =
      approx::AgentNets::create(world.spec().obs_dim, world.spec().action_space, {8}, rng, 1e-3, 1e-3, 1e-3);
  const oracle::TabularCmdp tab = world.to_tabular();
  const oracle::TabularPolicy pi = tabulate_policy(nets.policy, world);
  CHECK((pi.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
  const Mat q = oracle::policy_eval_exact(tab, pi, Channel::Reward).q;
  const Mat qc = oracle::policy_eval_exact(tab, pi, Channel::Cost).q;
  nets.q = table_net(q);
  nets.qc = table_net(qc);
  CHECK((tabulate_critic(nets.q, world) - q).cwiseAbs().maxCoeff() <= 1e-12);
  const OracleGap g = oracle_gap(nets, world, d);
  CHECK(g.q_mae <= 1e-12);
  CHECK(g.qc_mae <= 1e-12);
  CHECK(g.q_mae_weighted <= 1e-12);
  CHECK(std::abs(g.qc_ood_signed) <= 1e-12);
  CHECK(g.in_pairs + g.ood_pairs <= static_cast<std::size_t>(world.num_cells() * 5));

  nets.qc = table_net(qc.array() + 0.25);
  CHECK(oracle_gap(nets, world, d).qc_in_signed == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("alignment table renders the reference layout") {
  AlignmentReport dataset;
  dataset.mode = ProbeMode::Dataset;
  dataset.before.rho_q = -0.3852;
  dataset.after.rho_q = 0.8278;
  dataset.before.rho_qc = 0.1;
  dataset.after.rho_qc = 0.8252;
  const std::string table = format_alignment_table({dataset}, "BallCircle");
  std::istringstream in(table);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  REQUIRE(lines.size() == 5u);
  CHECK(lines[0] == "Env          Net  VPA         random    dataset");
  CHECK(lines[1] == "BallCircle   Q    before           -    -0.3852");
  CHECK(lines[2] == "BallCircle   Q    after            -     0.8278");
  CHECK(lines[4] == "BallCircle   Qc   after            -     0.8252");
}

TEST_CASE("alignment csv") {
  AlignmentReport r;
  r.mode = ProbeMode::Random;
  r.probes = 64;
  r.rollouts = 10;
  r.before.rho_q = 0.5;
  r.after.degenerate_qc = true;
  std::ostringstream out;
  write_alignment_csv(out, {r}, "grid");
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "env,mode,probes,rollouts,rho_q_before,rho_q_after,rho_qc_before,rho_qc_after,degenerate");
  CHECK(row.rfind("grid,random,64,10,", 0) == 0);
  CHECK(row.back() == '1');
}
