#include "o2o/approx/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace o2o::approx {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// log(1 - tanh(u)^2), stable for large |u|.
double log_one_minus_tanh_sq(double u) { return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u)); }

Mat softmax_columns(const Mat& logits) {
  Mat p = logits;
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    const double m = p.col(c).maxCoeff();
    p.col(c) = (p.col(c).array() - m).exp();
    p.col(c) /= p.col(c).sum();
  }
  return p;
}

Mat log_softmax_columns(const Mat& logits) {
  Mat lp = logits;
  for (Eigen::Index c = 0; c < lp.cols(); ++c) {
    const double m = lp.col(c).maxCoeff();
    const double lse = m + std::log((lp.col(c).array() - m).exp().sum());
    lp.col(c).array() -= lse;
  }
  return lp;
}

}  // namespace

std::string to_string(HeadKind h) { return h == HeadKind::Softmax ? "softmax" : "squashed_gaussian"; }

HeadKind head_from_string(const std::string& name) {
  if (name == "softmax") return HeadKind::Softmax;
  if (name == "squashed_gaussian") return HeadKind::SquashedGaussian;
  throw ParseError("unknown policy head '" + name + "'");
}

StochasticPolicy::StochasticPolicy(const cmdp::ActionSpace& space, Mlp net, Vec params)
    : space_(space), net_(std::move(net)), params_(std::move(params)) {
  head_ = space_.is_discrete() ? HeadKind::Softmax : HeadKind::SquashedGaussian;
  const Eigen::Index extra = head_ == HeadKind::SquashedGaussian ? space_.dim() : 0;
  if (net_.output_dim() != (space_.is_discrete() ? space_.count : space_.dim()))
    throw BoundsError("policy network output does not match the action space");
  if (params_.size() != net_.param_count() + extra) throw BoundsError("policy parameter vector has wrong length");
  if (!space_.is_discrete()) {
    center_ = 0.5 * (space_.high + space_.low);
    half_range_ = 0.5 * (space_.high - space_.low);
  }
}

StochasticPolicy StochasticPolicy::create(int obs_dim, const cmdp::ActionSpace& space, const std::vector<int>& hidden,
                                          Rng& rng, Activation activation, double init_log_std) {
  std::vector<int> sizes{obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(space.is_discrete() ? space.count : space.dim());
  Mlp net(sizes, activation);
  Vec net_params = net.init_params(rng, 0.1);
  Vec params = net_params;
  if (!space.is_discrete()) {
    params.resize(net.param_count() + space.dim());
    params.head(net.param_count()) = net_params;
    params.tail(space.dim()).setConstant(init_log_std);
  }
  return StochasticPolicy(space, std::move(net), std::move(params));
}

Vec StochasticPolicy::log_std() const {
  if (head_ != HeadKind::SquashedGaussian) return Vec();
  return params_.tail(space_.dim()).cwiseMax(kMinLogStd).cwiseMin(kMaxLogStd);
}

Vec StochasticPolicy::squash(const Vec& u) const {
  return center_ + half_range_.cwiseProduct(u.array().tanh().matrix());
}

double StochasticPolicy::squashed_log_prob(const Vec& mean, const Vec& noise) const {
  const Vec ls = log_std();
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double u = mean(i) + std::exp(ls(i)) * noise(i);
    lp += -0.5 * noise(i) * noise(i) - ls(i) - kHalfLog2Pi - std::log(half_range_(i)) - log_one_minus_tanh_sq(u);
  }
  return lp;
}

ActionSample StochasticPolicy::sample(const Vec& observation, Rng& rng) const {
  const Vec out = net_.forward(net_params(), Mat(observation)).col(0);
  ActionSample s;
  if (head_ == HeadKind::Softmax) {
    const Vec lp = log_softmax_columns(Mat(out)).col(0);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    int pick = static_cast<int>(lp.size()) - 1;
    for (Eigen::Index a = 0; a < lp.size(); ++a) {
      acc += std::exp(lp(a));
      if (u < acc) {
        pick = static_cast<int>(a);
        break;
      }
    }
    s.action = Vec::Constant(1, pick);
    s.log_prob = lp(pick);
    return s;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec noise(out.size());
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = normal(rng);
  const Vec u = out + log_std().array().exp().matrix().cwiseProduct(noise);
  s.action = squash(u).cwiseMax(space_.low).cwiseMin(space_.high);
  s.log_prob = squashed_log_prob(out, noise);
  return s;
}

double StochasticPolicy::log_prob(const Vec& observation, const Vec& action) const {
  const Vec out = net_.forward(net_params(), Mat(observation)).col(0);
  if (head_ == HeadKind::Softmax) {
    const Vec lp = log_softmax_columns(Mat(out)).col(0);
    return lp(static_cast<Eigen::Index>(action(0)));
  }
  const Vec ls = log_std();
  Vec noise(out.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double y = std::clamp((action(i) - center_(i)) / half_range_(i), -1.0 + 1e-15, 1.0 - 1e-15);
    noise(i) = (std::atanh(y) - out(i)) / std::exp(ls(i));
  }
  return squashed_log_prob(out, noise);
}

Vec StochasticPolicy::mode(const Vec& observation) const {
  const Vec out = net_.forward(net_params(), Mat(observation)).col(0);
  if (head_ == HeadKind::Softmax) {
    Eigen::Index best = 0;
    out.maxCoeff(&best);
    return Vec::Constant(1, static_cast<double>(best));
  }
  return squash(out);
}

Mat StochasticPolicy::probabilities(const Mat& observations) const {
  if (head_ != HeadKind::Softmax) throw UnsupportedError("probabilities() needs a softmax head");
  return softmax_columns(net_.forward(net_params(), observations));
}

Mat critic_inputs(const cmdp::ActionSpace& space, const Mat& observations, const Mat& actions) {
  if (observations.cols() != actions.cols()) throw BoundsError("critic_inputs: batch sizes differ");
  const Eigen::Index od = observations.rows();
  Mat x(od + space.feature_dim(), observations.cols());
  x.topRows(od) = observations;
  for (Eigen::Index c = 0; c < x.cols(); ++c) space.encode(actions.col(c), x.col(c).tail(space.feature_dim()));
  return x;
}

Mat gaussian_noise(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat n(rows, cols);
  for (Eigen::Index c = 0; c < n.cols(); ++c)
    for (Eigen::Index r = 0; r < n.rows(); ++r) n(r, c) = normal(rng);
  return n;
}

PolicyLoss policy_objective(const StochasticPolicy& policy, const Mat& observations, const ActionObjective& objective,
                            const Mat& noise, bool want_grad) {
  const Eigen::Index batch = observations.cols();
  if (batch == 0) throw BoundsError("policy objective: empty batch");
  const auto& space = policy.action_space();
  const double inv_b = 1.0 / static_cast<double>(batch);
  const double alpha = objective.entropy_weight;
  PolicyLoss out;
  if (want_grad) out.grad = Vec::Zero(policy.params().size());
  Mlp::Tape tape;
  const Mat net_out = policy.net().forward(policy.net_params(), observations, tape);
  long gate_open = 0, gate_total = 0;

  if (policy.head() == HeadKind::Softmax) {
    const Mat logp = log_softmax_columns(net_out);
    const Mat prob = logp.array().exp();
    const int n_act = space.count;
    Mat h = alpha * logp;  // per (action, state) payoff, entropy part
    for (int a = 0; a < n_act; ++a) {
      const Mat actions = Mat::Constant(1, batch, a);
      const Mat x = critic_inputs(space, observations, actions);
      Vec f = Vec::Zero(batch);
      for (const auto& term : objective.terms) f += term.weight * term.net->forward_batch(x).row(0).transpose();
      if (objective.gate_net) {
        const Vec g = objective.gate_net->forward_batch(x).row(0).transpose();
        for (Eigen::Index b = 0; b < batch; ++b) {
          const bool open = g(b) < objective.gate_threshold;
          gate_open += open;
          if (!open) f(b) = 0.0;
        }
        gate_total += batch;
      }
      h.row(a) += f.transpose();
    }
    const Vec expected = (prob.array() * h.array()).colwise().sum().transpose();
    out.value = expected.mean();
    if (want_grad) {
      Mat d_logits = prob.array() * (h.rowwise() - expected.transpose()).array();
      d_logits *= inv_b;
      policy.net().backward(policy.net_params(), tape, d_logits, out.grad.head(policy.net().param_count()));
    }
  } else {
    const int dim = space.dim();
    if (noise.rows() != dim || noise.cols() != batch) throw BoundsError("policy objective: noise has wrong shape");
    const Vec ls = policy.log_std();
    const Vec sd = ls.array().exp();
    const Mat u = net_out + sd.asDiagonal() * noise;
    const Mat t = u.array().tanh();
    Mat actions(dim, batch);
    for (Eigen::Index b = 0; b < batch; ++b) actions.col(b) = policy.squash(u.col(b));
    const Mat x = critic_inputs(space, observations, actions);
    Vec gate = Vec::Ones(batch);
    if (objective.gate_net) {
      const Vec g = objective.gate_net->forward_batch(x).row(0).transpose();
      for (Eigen::Index b = 0; b < batch; ++b) {
        gate(b) = g(b) < objective.gate_threshold ? 1.0 : 0.0;
        gate_open += gate(b) > 0.0;
      }
      gate_total += batch;
    }
    Vec f = Vec::Zero(batch);
    Mat df_da = Mat::Zero(dim, batch);
    const Eigen::Index od = observations.rows();
    for (const auto& term : objective.terms) {
      Mlp::Tape qt;
      const Mat q = term.net->arch.forward(term.net->params, x, qt);
      f += term.weight * q.row(0).transpose();
      if (want_grad) {
        const Mat dx = term.net->arch.backward_input(term.net->params, qt, Mat::Constant(1, batch, term.weight));
        df_da += dx.middleRows(od, dim);
      }
    }
    f.array() *= gate.array();
    Vec logp(batch);
    for (Eigen::Index b = 0; b < batch; ++b) logp(b) = policy.squashed_log_prob(net_out.col(b), noise.col(b));
    out.value = (alpha * logp + f).mean();
    if (want_grad) {
      const Vec half = 0.5 * (space.high - space.low);
      Mat d_u(dim, batch);
      for (Eigen::Index b = 0; b < batch; ++b)
        for (int i = 0; i < dim; ++i) {
          const double sech2 = 1.0 - t(i, b) * t(i, b);
          d_u(i, b) = inv_b * (alpha * 2.0 * t(i, b) + gate(b) * df_da(i, b) * half(i) * sech2);
        }
      policy.net().backward(policy.net_params(), tape, d_u, out.grad.head(policy.net().param_count()));
      const Vec raw = policy.params().tail(dim);
      for (int i = 0; i < dim; ++i) {
        const bool inside = raw(i) > StochasticPolicy::kMinLogStd && raw(i) < StochasticPolicy::kMaxLogStd;
        const double g = (d_u.row(i).array() * noise.row(i).array()).sum() * sd(i) - alpha;
        out.grad(policy.net().param_count() + i) = inside ? g : 0.0;
      }
    }
  }
  out.gate_open_fraction = gate_total > 0 ? static_cast<double>(gate_open) / static_cast<double>(gate_total) : 1.0;
  return out;
}

}  // namespace o2o::approx
