#include "o2o/approx/mlp.hpp"

#include <cmath>

namespace o2o::approx {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Linear: return "linear";
  }
  return "tanh";
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "linear") return Activation::Linear;
  throw ParseError("unknown activation '" + name + "'");
}

Mlp::Mlp(std::vector<int> layer_sizes, Activation hidden) : sizes_(std::move(layer_sizes)), hidden_(hidden) {
  if (sizes_.size() < 2) throw BoundsError("mlp needs at least an input and an output layer");
  param_count_ = 0;
  for (int s : sizes_)
    if (s < 1) throw BoundsError("mlp layer sizes must be positive");
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) param_count_ += static_cast<Eigen::Index>(sizes_[l] + 1) * sizes_[l + 1];
}

void Mlp::check_params(ParamsRef params) const {
  if (params.size() != param_count_)
    throw BoundsError("mlp: expected " + std::to_string(param_count_) + " parameters, got " +
                      std::to_string(params.size()));
}

Mat Mlp::forward(ParamsRef params, const Mat& x) const {
  Tape tape;
  return forward(params, x, tape);
}

Mat Mlp::forward(ParamsRef params, const Mat& x, Tape& tape) const {
  check_params(params);
  if (x.rows() != input_dim())
    throw BoundsError("mlp: input has " + std::to_string(x.rows()) + " rows, expected " + std::to_string(input_dim()));
  const std::size_t layers = sizes_.size() - 1;
  tape.values.resize(layers + 1);
  tape.values[0] = x;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    Eigen::Map<const Mat> w(params.data() + offset, out, in);
    offset += static_cast<Eigen::Index>(in) * out;
    Eigen::Map<const Vec> b(params.data() + offset, out);
    offset += out;
    Mat z = w * tape.values[l];
    z.colwise() += b;
    if (l + 1 < layers) {
      switch (hidden_) {
        // Vectorized exp is much faster than Eigen's scalar tanh for doubles;
        // saturates to +-1 correctly at both ends.
        case Activation::Tanh: z = 1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0); break;
        case Activation::Relu: z = z.cwiseMax(0.0); break;
        case Activation::Linear: break;
      }
    }
    tape.values[l + 1] = std::move(z);
  }
  return tape.values.back();
}

Mat Mlp::backward_input(ParamsRef params, const Tape& tape, const Mat& d_out) const {
  check_params(params);
  const std::size_t layers = sizes_.size() - 1;
  if (tape.values.size() != layers + 1) throw ProtocolError("mlp: backward without a matching forward tape");
  Eigen::Index offset = param_count_;
  Mat delta = d_out;
  for (std::size_t l = layers; l-- > 0;) {
    const int in = sizes_[l], out = sizes_[l + 1];
    offset -= static_cast<Eigen::Index>(in + 1) * out;
    if (l + 1 < layers) {
      const Mat& y = tape.values[l + 1];
      switch (hidden_) {
        case Activation::Tanh: delta.array() *= 1.0 - y.array().square(); break;
        case Activation::Relu: delta.array() *= (y.array() > 0.0).cast<double>(); break;
        case Activation::Linear: break;
      }
    }
    Eigen::Map<const Mat> w(params.data() + offset, out, in);
    delta = w.transpose() * delta;
  }
  return delta;
}

Mat Mlp::backward(ParamsRef params, const Tape& tape, const Mat& d_out, Eigen::Ref<Vec> grad) const {
  check_params(params);
  if (grad.size() != param_count_) throw BoundsError("mlp: gradient buffer has wrong size");
  const std::size_t layers = sizes_.size() - 1;
  if (tape.values.size() != layers + 1) throw ProtocolError("mlp: backward without a matching forward tape");
  std::vector<Eigen::Index> offsets(layers);
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = offset;
    offset += static_cast<Eigen::Index>(sizes_[l] + 1) * sizes_[l + 1];
  }
  Mat delta = d_out;  // dL/dz of the current layer
  for (std::size_t l = layers; l-- > 0;) {
    const int in = sizes_[l], out = sizes_[l + 1];
    if (l + 1 < layers) {
      const Mat& y = tape.values[l + 1];
      switch (hidden_) {
        case Activation::Tanh: delta.array() *= 1.0 - y.array().square(); break;
        case Activation::Relu: delta.array() *= (y.array() > 0.0).cast<double>(); break;
        case Activation::Linear: break;
      }
    }
    Eigen::Map<const Mat> w(params.data() + offsets[l], out, in);
    Eigen::Map<Mat> gw(grad.data() + offsets[l], out, in);
    Eigen::Map<Vec> gb(grad.data() + offsets[l] + static_cast<Eigen::Index>(in) * out, out);
    gw.noalias() += delta * tape.values[l].transpose();
    gb += delta.rowwise().sum();
    delta = w.transpose() * delta;
  }
  return delta;
}

Vec Mlp::init_params(Rng& rng, double output_scale) const {
  Vec p = Vec::Zero(param_count_);
  Eigen::Index offset = 0;
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in)) * (l + 1 == layers ? output_scale : 1.0);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(in) * out; ++i) p(offset + i) = u(rng);
    offset += static_cast<Eigen::Index>(in + 1) * out;
  }
  return p;
}

DifferentiableNet::DifferentiableNet(Mlp a, Vec p) : arch(std::move(a)), params(std::move(p)) {
  if (params.size() != arch.param_count()) throw BoundsError("network parameter vector has wrong length");
}

DifferentiableNet DifferentiableNet::random(const std::vector<int>& layer_sizes, Rng& rng, Activation hidden,
                                            double output_scale) {
  Mlp arch(layer_sizes, hidden);
  Vec p = arch.init_params(rng, output_scale);
  return {std::move(arch), std::move(p)};
}

Vec DifferentiableNet::forward(const Vec& x) const { return arch.forward(params, Mat(x)).col(0); }

double mse_loss(const DifferentiableNet& net, const Mat& inputs, const Vec& targets, Vec* grad) {
  if (net.arch.output_dim() != 1) throw BoundsError("mse_loss needs a scalar-output network");
  if (inputs.cols() != targets.size() || targets.size() == 0) throw BoundsError("mse_loss: empty or mismatched batch");
  Mlp::Tape tape;
  const Mat pred = net.arch.forward(net.params, inputs, tape);
  const Vec err = pred.row(0).transpose() - targets;
  const double n = static_cast<double>(targets.size());
  if (grad) {
    Mat d_out = (2.0 / n) * err.transpose();
    net.arch.backward(net.params, tape, d_out, *grad);
  }
  return err.squaredNorm() / n;
}

}  // namespace o2o::approx
