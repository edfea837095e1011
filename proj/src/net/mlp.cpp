// Licensed under the Apache License 2.0 (see LICENSE file).

#include "net/mlp.hpp"

#include "common/errors.hpp"

namespace neuralsurv::net {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> weight_map(std::span<const double> theta, std::size_t offset, std::size_t rows,
                                      std::size_t cols) {
  return {theta.data() + offset, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

Eigen::Map<const Eigen::VectorXd> bias_map(std::span<const double> theta, std::size_t offset, std::size_t n) {
  return {theta.data() + offset, static_cast<Eigen::Index>(n)};
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::kRelu ? "relu" : "identity"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "identity" || s == "linear") return Activation::kIdentity;
  throw InputError("unknown activation '" + s + "'");
}

MlpModel::MlpModel(std::vector<std::size_t> layer_sizes, Activation hidden)
    : sizes_(std::move(layer_sizes)), activation_(hidden) {
  if (sizes_.size() < 2) throw InputError("MlpModel: need at least input and output layers");
  if (sizes_.back() != 1) throw InputError("MlpModel: output layer must have width 1");
  if (sizes_.front() < 1) throw InputError("MlpModel: input must contain the time coordinate");
  for (auto s : sizes_)
    if (s == 0) throw InputError("MlpModel: zero-width layer");
  offsets_.resize(sizes_.size() - 1);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_[l] = m_;
    m_ += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
}

MlpModel MlpModel::default_architecture(std::size_t covariate_count) {
  return MlpModel({covariate_count + 1, 16, 16, 1}, Activation::kRelu);
}

void MlpModel::check_theta(std::span<const double> theta) const {
  if (theta.size() != m_)
    throw InputError("MlpModel: parameter vector has length " + std::to_string(theta.size()) + ", expected " +
                     std::to_string(m_));
}

Eigen::VectorXd make_input(double t, std::span<const double> x) {
  Eigen::VectorXd in(static_cast<Eigen::Index>(x.size() + 1));
  in[0] = t;
  for (std::size_t j = 0; j < x.size(); ++j) in[static_cast<Eigen::Index>(j + 1)] = x[j];
  return in;
}

ForwardCache MlpModel::forward_batch(const Eigen::MatrixXd& inputs, std::span<const double> theta) const {
  check_theta(theta);
  if (static_cast<std::size_t>(inputs.rows()) != input_dim())
    throw InputError("MlpModel: input has " + std::to_string(inputs.rows() - 1) + " covariates, expected " +
                     std::to_string(covariate_dim()));
  ForwardCache cache;
  const std::size_t L = layer_count();
  cache.activations.reserve(L + 1);
  cache.pre_activations.reserve(L);
  cache.activations.push_back(inputs);
  for (std::size_t l = 0; l < L; ++l) {
    const auto W = weight_map(theta, weight_offset(l), sizes_[l + 1], sizes_[l]);
    const auto b = bias_map(theta, bias_offset(l), sizes_[l + 1]);
    Eigen::MatrixXd z = W * cache.activations.back();
    z.colwise() += b;
    cache.pre_activations.push_back(z);
    if (l + 1 < L && activation_ == Activation::kRelu) z = z.cwiseMax(0.0);
    cache.activations.push_back(std::move(z));
  }
  cache.output = cache.activations.back().row(0).transpose();
  return cache;
}

std::vector<Eigen::MatrixXd> MlpModel::backprop_deltas(const ForwardCache& cache, std::span<const double> theta,
                                                       Eigen::MatrixXd top) const {
  // deltas[l] = d(objective)/d(pre_activations[l]).
  const std::size_t L = layer_count();
  std::vector<Eigen::MatrixXd> deltas(L);
  deltas[L - 1] = std::move(top);
  for (std::size_t l = L - 1; l-- > 0;) {
    const auto W_next = weight_map(theta, weight_offset(l + 1), sizes_[l + 2], sizes_[l + 1]);
    Eigen::MatrixXd d = W_next.transpose() * deltas[l + 1];
    if (activation_ == Activation::kRelu)
      d = d.cwiseProduct((cache.pre_activations[l].array() > 0.0).cast<double>().matrix());
    deltas[l] = std::move(d);
  }
  return deltas;
}

Eigen::VectorXd MlpModel::vjp(const ForwardCache& cache, std::span<const double> theta,
                              const Eigen::VectorXd& cotangent) const {
  check_theta(theta);
  const auto deltas = backprop_deltas(cache, theta, cotangent.transpose());
  Eigen::VectorXd grad(static_cast<Eigen::Index>(m_));
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const RowMajor gW = deltas[l] * cache.activations[l].transpose();
    grad.segment(static_cast<Eigen::Index>(weight_offset(l)), gW.size()) =
        Eigen::Map<const Eigen::VectorXd>(gW.data(), gW.size());
    grad.segment(static_cast<Eigen::Index>(bias_offset(l)), static_cast<Eigen::Index>(sizes_[l + 1])) =
        deltas[l].rowwise().sum();
  }
  return grad;
}

Eigen::MatrixXd MlpModel::jacobian_batch(const ForwardCache& cache, std::span<const double> theta) const {
  check_theta(theta);
  const Eigen::Index P = cache.output.size();
  const auto deltas = backprop_deltas(cache, theta, Eigen::MatrixXd::Ones(1, P));
  Eigen::MatrixXd J(static_cast<Eigen::Index>(m_), P);
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const Eigen::Index rows = static_cast<Eigen::Index>(sizes_[l + 1]);
    const Eigen::Index cols = static_cast<Eigen::Index>(sizes_[l]);
    const Eigen::Index w0 = static_cast<Eigen::Index>(weight_offset(l));
    const Eigen::Index b0 = static_cast<Eigen::Index>(bias_offset(l));
    const auto& D = deltas[l];
    const auto& H = cache.activations[l];
    for (Eigen::Index p = 0; p < P; ++p) {
      for (Eigen::Index a = 0; a < rows; ++a) {
        const double da = D(a, p);
        double* out = J.col(p).data() + w0 + a * cols;
        for (Eigen::Index b = 0; b < cols; ++b) out[b] = da * H(b, p);
      }
      J.col(p).segment(b0, rows) = D.col(p);
    }
  }
  return J;
}

double MlpModel::forward(double t, std::span<const double> x, std::span<const double> theta) const {
  return forward_batch(make_input(t, x), theta).output[0];
}

Eigen::VectorXd MlpModel::jacobian(double t, std::span<const double> x, std::span<const double> theta) const {
  const auto cache = forward_batch(make_input(t, x), theta);
  return jacobian_batch(cache, theta).col(0);
}

MlpParameters MlpModel::unflatten(std::span<const double> theta) const {
  check_theta(theta);
  MlpParameters p;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    p.weights.emplace_back(weight_map(theta, weight_offset(l), sizes_[l + 1], sizes_[l]));
    p.biases.emplace_back(bias_map(theta, bias_offset(l), sizes_[l + 1]));
  }
  return p;
}

Eigen::VectorXd MlpModel::flatten(const MlpParameters& params) const {
  if (params.weights.size() != layer_count() || params.biases.size() != layer_count())
    throw InputError("MlpModel::flatten: layer count mismatch");
  Eigen::VectorXd theta(static_cast<Eigen::Index>(m_));
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const auto& W = params.weights[l];
    const auto& b = params.biases[l];
    if (static_cast<std::size_t>(W.rows()) != sizes_[l + 1] || static_cast<std::size_t>(W.cols()) != sizes_[l] ||
        static_cast<std::size_t>(b.size()) != sizes_[l + 1])
      throw InputError("MlpModel::flatten: layer " + std::to_string(l) + " has the wrong shape");
    const RowMajor Wr = W;
    theta.segment(static_cast<Eigen::Index>(weight_offset(l)), Wr.size()) =
        Eigen::Map<const Eigen::VectorXd>(Wr.data(), Wr.size());
    theta.segment(static_cast<Eigen::Index>(bias_offset(l)), b.size()) = b;
  }
  return theta;
}

}  // namespace neuralsurv::net
