// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <Eigen/Core>

namespace neuralsurv::cavi {

// Posterior covariance of theta, either a dense m x m matrix or the factor
// form (I + W W^T)^{-1} = I - W M^{-1} W^T with M = I_R + W^T W = L L^T.
class Covariance {
 public:
  Covariance() = default;
  static Covariance identity(Eigen::Index m);
  static Covariance from_dense(Eigen::MatrixXd sigma);
  // Solves (I + W W^T)^{-1}. Uses the capacitance system when m > R and a
  // dense Cholesky otherwise; the result is materialized densely when m <= dense_limit.
  static Covariance from_precision_factor(const Eigen::MatrixXd& W, Eigen::Index dense_limit = 5000);

  Eigen::Index dim() const { return m_; }
  bool is_dense() const { return dense_; }
  const Eigen::MatrixXd& dense() const { return sigma_; }
  const Eigen::MatrixXd& W() const { return W_; }

  Eigen::MatrixXd to_dense() const;
  Eigen::VectorXd diagonal() const;
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  // diag(J^T Sigma J) for J of shape m x P.
  Eigen::VectorXd quadratic_forms(const Eigen::MatrixXd& J) const;
  // Sigma^{1/2} Z for a batch of standard-normal columns.
  Eigen::MatrixXd transform_normals(const Eigen::MatrixXd& Z) const;

 private:
  Eigen::Index m_ = 0;
  bool dense_ = true;
  Eigen::MatrixXd sigma_;
  Eigen::MatrixXd W_;
  Eigen::MatrixXd L_;  // Cholesky factor of the capacitance matrix
};

}  // namespace neuralsurv::cavi
