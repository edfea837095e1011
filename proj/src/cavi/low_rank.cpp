// Licensed under the Apache License 2.0 (see LICENSE file).

#include "cavi/low_rank.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "common/errors.hpp"

namespace neuralsurv::cavi {

Eigen::MatrixXd LowRankFactor::scaled() const {
  if (c.size() != U.cols()) throw InputError("low-rank factor: weight count does not match columns");
  if ((c.array() < 0.0).any()) throw NumericalError("low-rank factor: negative column weight");
  return U * c.cwiseSqrt().asDiagonal();
}

LowRankFactor LowRankFactor::compressed() const {
  Eigen::Index keep = 0;
  for (Eigen::Index r = 0; r < c.size(); ++r) keep += c[r] > 0.0;
  LowRankFactor out{Eigen::MatrixXd(U.rows(), keep), Eigen::VectorXd(keep)};
  for (Eigen::Index r = 0, k = 0; r < c.size(); ++r) {
    if (!(c[r] > 0.0)) continue;
    out.U.col(k) = U.col(r);
    out.c[k++] = c[r];
  }
  return out;
}

Eigen::MatrixXd assemble_B(const LowRankFactor& f) {
  const Eigen::MatrixXd W = f.scaled();
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(f.dim(), f.dim());
  B.selfadjointView<Eigen::Lower>().rankUpdate(W);
  B.triangularView<Eigen::StrictlyUpper>() = B.transpose();
  return 0.5 * B;
}

Eigen::MatrixXd capacitance_cholesky(const Eigen::MatrixXd& W) {
  const Eigen::Index r = W.cols();
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(r, r);
  M.selfadjointView<Eigen::Lower>().rankUpdate(W.transpose());
  for (double jitter = 0.0; jitter <= 1e-6 * (1.0 + 1e-9); jitter = jitter == 0.0 ? 1e-12 : jitter * 10.0) {
    Eigen::MatrixXd Mj = M;
    if (jitter > 0.0) Mj.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(Mj);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite()) return llt.matrixL();
  }
  throw NumericalError("capacitance system is not positive definite (quadrature weights corrupted?)");
}

Eigen::MatrixXd woodbury_inverse_B(const LowRankFactor& f) {
  const Eigen::MatrixXd W = f.scaled();
  const Eigen::MatrixXd L = capacitance_cholesky(W);
  // (I + W W^T)^{-1} = I - W M^{-1} W^T with M = L L^T.
  const Eigen::MatrixXd V = L.triangularView<Eigen::Lower>().solve(W.transpose());
  Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(f.dim(), f.dim());
  inv.selfadjointView<Eigen::Lower>().rankUpdate(V.transpose(), -1.0);
  inv.triangularView<Eigen::StrictlyUpper>() = inv.transpose();
  return 2.0 * inv;
}

Eigen::MatrixXd dense_inverse_B(const LowRankFactor& f) {
  const Eigen::MatrixXd B = assemble_B(f);
  Eigen::LLT<Eigen::MatrixXd> llt(B);
  if (llt.info() != Eigen::Success) throw NumericalError("B is not positive definite");
  return llt.solve(Eigen::MatrixXd::Identity(f.dim(), f.dim()));
}

}  // namespace neuralsurv::cavi
