// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace neuralsurv::net {

enum class Activation { kRelu, kIdentity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Unflattened parameters: weights[l] is (fan_out x fan_in), biases[l] has fan_out entries.
struct MlpParameters {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Cached intermediate values of a batched forward pass.
struct ForwardCache {
  // activations[0] is the input batch; activations[l] the output of layer l.
  std::vector<Eigen::MatrixXd> activations;
  // pre_activations[l] is the affine output of layer l+1 (before the nonlinearity).
  std::vector<Eigen::MatrixXd> pre_activations;
  Eigen::VectorXd output;
};

// Feed-forward network g(t, x; theta) with scalar output.
//
// Input vector is (t, x_1, ..., x_p). Hidden layers use the configured
// activation; the output layer is affine. The flat parameter vector lists,
// layer by layer, the weight matrix in row-major order followed by that
// layer's bias. The rectified-linear derivative at exactly 0 is taken as 0.
class MlpModel {
 public:
  MlpModel(std::vector<std::size_t> layer_sizes, Activation hidden = Activation::kRelu);

  // p+1 -> 16 -> 16 -> 1 with rectified-linear hidden units.
  static MlpModel default_architecture(std::size_t covariate_count);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  Activation activation() const { return activation_; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t covariate_dim() const { return sizes_.front() - 1; }
  std::size_t layer_count() const { return sizes_.size() - 1; }
  std::size_t parameter_count() const { return m_; }
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + sizes_[layer] * sizes_[layer + 1];
  }

  double forward(double t, std::span<const double> x, std::span<const double> theta) const;
  Eigen::VectorXd jacobian(double t, std::span<const double> x, std::span<const double> theta) const;

  // inputs is (input_dim x P), one column per evaluation point.
  ForwardCache forward_batch(const Eigen::MatrixXd& inputs, std::span<const double> theta) const;
  // sum_p cotangent[p] * d g_p / d theta.
  Eigen::VectorXd vjp(const ForwardCache& cache, std::span<const double> theta,
                      const Eigen::VectorXd& cotangent) const;
  // (parameter_count x P) matrix of per-point gradients.
  Eigen::MatrixXd jacobian_batch(const ForwardCache& cache, std::span<const double> theta) const;

  MlpParameters unflatten(std::span<const double> theta) const;
  Eigen::VectorXd flatten(const MlpParameters& params) const;

 private:
  void check_theta(std::span<const double> theta) const;
  std::vector<Eigen::MatrixXd> backprop_deltas(const ForwardCache& cache, std::span<const double> theta,
                                               Eigen::MatrixXd top) const;

  std::vector<std::size_t> sizes_;
  Activation activation_;
  std::vector<std::size_t> offsets_;
  std::size_t m_ = 0;
};

// Column vector (t, x) for a single evaluation.
Eigen::VectorXd make_input(double t, std::span<const double> x);

}  // namespace neuralsurv::net
