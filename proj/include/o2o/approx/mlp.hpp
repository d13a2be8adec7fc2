#pragma once

#include "o2o/core.hpp"

#include <string>
#include <vector>

namespace o2o::approx {

enum class Activation { Tanh, Relu, Linear };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

using ParamsRef = Eigen::Ref<const Vec>;

/// Fully connected network architecture. Parameters live outside the object
/// in one flat vector: for each layer the (out x in) weight matrix in
/// column-major order followed by the bias. Hidden layers use `hidden`, the
/// output layer is linear. Batches are column-major: one sample per column.
class Mlp {
 public:
  /// Post-activation values of every layer; entry 0 is the input batch.
  struct Tape {
    std::vector<Mat> values;
  };

  Mlp() = default;
  explicit Mlp(std::vector<int> layer_sizes, Activation hidden = Activation::Tanh);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  Activation hidden_activation() const { return hidden_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  Eigen::Index param_count() const { return param_count_; }

  Mat forward(ParamsRef params, const Mat& x) const;
  Mat forward(ParamsRef params, const Mat& x, Tape& tape) const;
  /// Reverse pass. Accumulates dL/dparams into `grad` and returns dL/dx.
  Mat backward(ParamsRef params, const Tape& tape, const Mat& d_out, Eigen::Ref<Vec> grad) const;
  /// Reverse pass for dL/dx only.
  Mat backward_input(ParamsRef params, const Tape& tape, const Mat& d_out) const;

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases; the output
  /// layer is scaled by `output_scale`.
  Vec init_params(Rng& rng, double output_scale = 1.0) const;

 private:
  void check_params(ParamsRef params) const;

  std::vector<int> sizes_{1, 1};
  Activation hidden_ = Activation::Tanh;
  Eigen::Index param_count_ = 2;
};

/// Architecture plus parameters.
struct DifferentiableNet {
  Mlp arch;
  Vec params;

  DifferentiableNet() = default;
  DifferentiableNet(Mlp a, Vec p);
  static DifferentiableNet random(const std::vector<int>& layer_sizes, Rng& rng,
                                  Activation hidden = Activation::Tanh, double output_scale = 1.0);

  Vec forward(const Vec& x) const;
  Mat forward_batch(const Mat& x) const { return arch.forward(params, x); }
};

/// Mean squared error of a scalar-output net against fixed targets:
/// L = mean_i (net(x_i) - y_i)^2. Gradient w.r.t. the parameters is
/// accumulated into `grad` when non-null.
double mse_loss(const DifferentiableNet& net, const Mat& inputs, const Vec& targets, Vec* grad);

}  // namespace o2o::approx
