// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <Eigen/Core>

namespace neuralsurv::cavi {

// B = 1/2 (I_m + U diag(c) U^T) with non-negative column weights c.
struct LowRankFactor {
  Eigen::MatrixXd U;  // m x R
  Eigen::VectorXd c;  // R

  Eigen::Index dim() const { return U.rows(); }
  Eigen::Index rank() const { return U.cols(); }
  // W = U diag(sqrt(c)), so that U C U^T = W W^T.
  Eigen::MatrixXd scaled() const;
  // Copy without the zero-weight columns.
  LowRankFactor compressed() const;
};

Eigen::MatrixXd assemble_B(const LowRankFactor& f);

// Cholesky factor of I_R + W^T W, escalating a diagonal jitter from 1e-12 up
// to 1e-6 when the plain factorization fails. Throws NumericalError beyond that.
Eigen::MatrixXd capacitance_cholesky(const Eigen::MatrixXd& W);

// B^{-1} through the R x R capacitance system.
Eigen::MatrixXd woodbury_inverse_B(const LowRankFactor& f);
// B^{-1} through a dense m x m Cholesky solve.
Eigen::MatrixXd dense_inverse_B(const LowRankFactor& f);

}  // namespace neuralsurv::cavi
