#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "../support/loss_instances.hpp"

#include "o2o/approx/checkpoint.hpp"
#include "o2o/approx/optim.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <sstream>

using namespace o2o;
using namespace o2o::approx;

namespace {

// Plain loops over the documented parameter layout.
Vec naive_forward(const std::vector<int>& sizes, const Vec& params, const Vec& x) {
  Vec h = x;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    Vec z(out);
    for (int o = 0; o < out; ++o) {
      double acc = params(off + static_cast<std::size_t>(in) * out + o);
      for (int i = 0; i < in; ++i) acc += params(off + static_cast<std::size_t>(i) * out + o) * h(i);
      z(o) = (l + 2 < sizes.size()) ? std::tanh(acc) : acc;
    }
    off += static_cast<std::size_t>(in + 1) * out;
    h = z;
  }
  return h;
}

StochasticPolicy gaussian_policy_1d(double mean_bias, double log_std) {
  Rng rng(3);
  StochasticPolicy p = StochasticPolicy::create(1, cmdp::ActionSpace::continuous(Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)),
                                                {4}, rng);
  p.params().setZero();
  // Output bias is the last network parameter before the log-std.
  p.params()(p.net().param_count() - 1) = mean_bias;
  p.params()(p.params().size() - 1) = log_std;
  return p;
}

}  // namespace

TEST_CASE("forward: zero parameters give zero output") {
  Mlp net({3, 4, 2});
  const Vec out = net.forward(Vec::Zero(net.param_count()), Mat::Constant(3, 1, 0.7)).col(0);
  CHECK(out.isZero(0.0));
}

TEST_CASE("forward: one linear layer with weight 1 is the identity") {
  Mlp net({1, 1});
  Vec p(2);
  p << 1.0, 0.0;
  CHECK(net.forward(p, Mat::Constant(1, 1, 3.0))(0, 0) == 3.0);
}

TEST_CASE("forward: random nets match a naive loop oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<int> sizes{3, 5, 4, 2};
    DifferentiableNet net = DifferentiableNet::random(sizes, rng);
    Vec x = Vec::Random(3) * 2.0;
    const Vec got = net.forward(x);
    const Vec want = naive_forward(sizes, net.params, x);
    CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("forward: wrong input size is rejected") {
  Mlp net({3, 2});
  CHECK_THROWS_AS(net.forward(Vec::Zero(net.param_count()), Mat::Zero(2, 1)), BoundsError);
  CHECK_THROWS_AS(net.forward(Vec::Zero(3), Mat::Zero(3, 1)), BoundsError);
}

TEST_CASE("mse gradient of a linear unit matches the closed form") {
  Mlp arch({2, 1}, Activation::Linear);
  Vec p(3);
  p << 0.5, -1.0, 0.25;  // w0, w1, b
  Mat x(2, 3);
  x << 1, 2, -1, 0, 1, 3;
  Vec y(3);
  y << 0.0, 1.0, -2.0;
  Vec grad = Vec::Zero(3);
  const DifferentiableNet net(arch, p);
  mse_loss(net, x, y, &grad);
  Vec want = Vec::Zero(3);
  for (int i = 0; i < 3; ++i) {
    const double err = p(0) * x(0, i) + p(1) * x(1, i) + p(2) - y(i);
    want(0) += 2.0 / 3.0 * err * x(0, i);
    want(1) += 2.0 / 3.0 * err * x(1, i);
    want(2) += 2.0 / 3.0 * err;
  }
  CHECK((grad - want).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("mse gradient is zero when predictions hit the targets") {
  Rng rng(2);
  DifferentiableNet net = DifferentiableNet::random({2, 3, 1}, rng);
  Mat x = Mat::Random(2, 4);
  const Vec y = net.forward_batch(x).row(0).transpose();
  Vec grad = Vec::Zero(net.params.size());
  CHECK(mse_loss(net, x, y, &grad) == 0.0);
  CHECK(grad.isZero(0.0));
}

TEST_CASE("every training loss passes central finite differences") {
  for (std::uint64_t seed = 100; seed < 106; ++seed) {
    for (const auto& c : testing::check_all_losses(seed)) {
      INFO(c.loss << " seed " << seed << " coord " << c.result.worst << " analytic " << c.result.analytic
                  << " numeric " << c.result.numeric);
      CHECK(c.result.max_rel_error <= 1e-4);
    }
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Adam opt(3, 0.1);
  Vec p(3);
  p << 1.0, -2.0, 3.0;
  const Vec before = p;
  opt.step(p, Vec::Zero(3));
  CHECK(p == before);
}

TEST_CASE("adam: one step matches the hand formula") {
  Adam opt(1, 0.1);
  Vec p = Vec::Constant(1, 2.0);
  opt.step(p, Vec::Constant(1, 0.5));
  // m = 0.05, v = 2.5e-4; bias-corrected m_hat = 0.5, v_hat = 0.25.
  CHECK(p(0) == doctest::Approx(2.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-15));
  CHECK(opt.m(0) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(opt.v(0) == doctest::Approx(2.5e-4).epsilon(1e-15));
  // Second step with known moments.
  opt.step(p, Vec::Constant(1, -1.0));
  const double m = 0.9 * 0.05 - 0.1, v = 0.999 * 2.5e-4 + 0.001;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  CHECK(p(0) == doctest::Approx(2.0 - 0.1 * 0.5 / (0.5 + 1e-8) - 0.1 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-13));
}

TEST_CASE("adam: convex quadratic loss decreases monotonically after warmup") {
  Adam opt(2, 0.05);
  Vec p(2);
  p << 3.0, -2.0;
  auto loss = [](const Vec& x) { return 0.5 * (x(0) * x(0) + 4.0 * x(1) * x(1)); };
  double prev = loss(p);
  for (int i = 0; i < 40; ++i) {
    Vec g(2);
    g << p(0), 4.0 * p(1);
    opt.step(p, g);
    const double now = loss(p);
    if (i >= 5) CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("adam: non-finite gradient raises divergence and leaves params intact") {
  Adam opt(2, 0.1);
  Vec p = Vec::Ones(2);
  Vec g(2);
  g << 1.0, std::nan("");
  CHECK_THROWS_AS(opt.step(p, g, "q"), DivergenceError);
  CHECK(p == Vec::Ones(2));
  CHECK_THROWS_AS(opt.step(p, Vec::Ones(3)), BoundsError);
}

TEST_CASE("soft update examples") {
  Vec t = Vec::Zero(4);
  soft_update(t, Vec::Ones(4), 0.05);
  CHECK(t == Vec::Constant(4, 0.05));
  Vec a = Vec::Random(3), b = Vec::Random(3);
  Vec a1 = a;
  soft_update(a1, b, 1.0);
  CHECK(a1 == b);
  Vec a0 = a;
  soft_update(a0, b, 0.0);
  CHECK(a0 == a);
  CHECK_THROWS_AS(soft_update(a0, Vec::Ones(2), 0.5), BoundsError);
  CHECK_THROWS_AS(soft_update(a0, b, 1.5), BoundsError);
}

TEST_CASE("soft update contracts toward the source") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Vec t = Vec::Random(6) * 10, s = Vec::Random(6) * 10;
    const double tau = u(rng);
    const double before = (t - s).norm();
    soft_update(t, s, tau);
    CHECK((t - s).norm() <= (1.0 - tau) * before + 1e-12);
  }
}

TEST_CASE("softmax head: single action has log-prob zero") {
  Rng rng(1);
  StochasticPolicy p = StochasticPolicy::create(2, cmdp::ActionSpace::discrete(1), {3}, rng);
  const ActionSample s = p.sample(Vec::Ones(2), rng);
  CHECK(s.action(0) == 0.0);
  CHECK(s.log_prob == 0.0);
}

TEST_CASE("softmax head: uniform over four actions") {
  Rng rng(1);
  StochasticPolicy p = StochasticPolicy::create(2, cmdp::ActionSpace::discrete(4), {3}, rng);
  p.params().setZero();
  for (int i = 0; i < 50; ++i) {
    const ActionSample s = p.sample(Vec::Random(2), rng);
    CHECK(s.log_prob == doctest::Approx(-std::log(4.0)).epsilon(1e-14));
  }
  CHECK(p.probabilities(Mat::Random(2, 5)).colwise().sum().isOnes(1e-14));
}

TEST_CASE("squashed gaussian: sample moments match the head parameters") {
  const double mean = 0.3, log_std = -0.6, sd = std::exp(log_std);
  StochasticPolicy p = gaussian_policy_1d(mean, log_std);
  Rng rng(9);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const ActionSample s = p.sample(Vec::Zero(1), rng);
    REQUIRE(std::abs(s.action(0)) <= 1.0);
    REQUIRE(std::isfinite(s.log_prob));
    const double u = std::atanh(s.action(0));
    sum += u;
    sq += u * u;
  }
  const double m = sum / n, var = sq / n - m * m;
  CHECK(std::abs(m - mean) <= 3.0 * sd / std::sqrt(n));
  // Standard error of a sample std is about sd / sqrt(2n).
  CHECK(std::abs(std::sqrt(var) - sd) <= 3.0 * sd / std::sqrt(2.0 * n));
}

TEST_CASE("squashed gaussian: histogram density matches log_prob") {
  StochasticPolicy p = gaussian_policy_1d(-0.2, -0.4);
  Rng rng(4);
  const int n = 200000, bins = 20;
  std::vector<int> counts(bins, 0);
  for (int i = 0; i < n; ++i) {
    const double a = p.sample(Vec::Zero(1), rng).action(0);
    ++counts[std::min(bins - 1, static_cast<int>((a + 1.0) / 2.0 * bins))];
  }
  const double width = 2.0 / bins;
  for (int b = 0; b < bins; ++b) {
    // Exact bin mass by fine midpoint quadrature of the density.
    double mass = 0.0;
    const int sub = 200;
    for (int k = 0; k < sub; ++k) {
      const double a = -1.0 + width * (b + (k + 0.5) / sub);
      mass += std::exp(p.log_prob(Vec::Zero(1), Vec::Constant(1, a))) * width / sub;
    }
    const double freq = static_cast<double>(counts[b]) / n;
    const double se = std::sqrt(std::max(mass * (1 - mass), 1e-12) / n);
    INFO("bin " << b << " freq " << freq << " mass " << mass);
    CHECK(std::abs(freq - mass) <= 4.0 * se + 1e-5);
  }
}

TEST_CASE("squashed gaussian: density integrates to one") {
  for (double mean : {-1.0, 0.0, 0.8}) {
    for (double log_std : {-1.5, -0.5, 0.3}) {
      StochasticPolicy p = gaussian_policy_1d(mean, log_std);
      const int n = 40000;
      double total = 0.0;
      for (int k = 0; k < n; ++k) {
        const double a = -1.0 + 2.0 * (k + 0.5) / n;
        total += std::exp(p.log_prob(Vec::Zero(1), Vec::Constant(1, a))) * 2.0 / n;
      }
      CHECK(std::abs(total - 1.0) <= 1e-2);
    }
  }
}

TEST_CASE("squashed gaussian: sampled log-prob agrees with log_prob") {
  StochasticPolicy p = gaussian_policy_1d(0.5, -1.0);
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const ActionSample s = p.sample(Vec::Zero(1), rng);
    CHECK(s.log_prob == doctest::Approx(p.log_prob(Vec::Zero(1), s.action)).epsilon(1e-8));
  }
}

TEST_CASE("checkpoint round trip is bit-exact") {
  Rng rng(21);
  const auto space = cmdp::ActionSpace::continuous(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
  AgentNets nets = AgentNets::create(3, space, {6, 5}, rng, 1e-3, 2e-3, 3e-3);
  // Give optimizers non-trivial moments.
  nets.q_opt.step(nets.q.params, Vec::Random(nets.q.params.size()));
  nets.policy.params()(0) = std::nextafter(1.0, 2.0);
  Checkpoint ckpt;
  nets.store(ckpt);
  ckpt.meta["rng"] = rng_state(rng);
  std::stringstream buf;
  write_checkpoint(buf, ckpt);
  const std::string bytes = buf.str();
  Checkpoint back = read_checkpoint(buf);
  std::stringstream again;
  write_checkpoint(again, back);
  CHECK(again.str() == bytes);
  AgentNets restored = AgentNets::restore(back, space);
  CHECK(restored.policy.params() == nets.policy.params());
  CHECK(restored.q.params == nets.q.params);
  CHECK(restored.qc.params == nets.qc.params);
  CHECK(restored.q_target == nets.q_target);
  CHECK(restored.qc_target == nets.qc_target);
  CHECK(restored.q_opt.m == nets.q_opt.m);
  CHECK(restored.q_opt.v == nets.q_opt.v);
  CHECK(restored.q_opt.step_count == nets.q_opt.step_count);
  CHECK(restored.q.arch.layer_sizes() == nets.q.arch.layer_sizes());
  Rng r2 = rng_from_state(back.meta["rng"].get<std::string>());
  CHECK(r2() == rng());
}

TEST_CASE("checkpoint file errors") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.bin"), MissingArtifactError);
  std::stringstream bad("{\"format\":\"other\"}\n");
  CHECK_THROWS_AS(read_checkpoint(bad), ParseError);
  const auto path = std::filesystem::temp_directory_path() / "o2o_truncated.ckpt";
  Checkpoint ckpt;
  ckpt.put({"x", {}, "", "", Vec::Ones(8)});
  save_checkpoint(path.string(), ckpt);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  CHECK_THROWS_AS(load_checkpoint(path.string()), ParseError);
  std::filesystem::remove(path);
}
