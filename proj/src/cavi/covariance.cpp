// Licensed under the Apache License 2.0 (see LICENSE file).

#include "cavi/covariance.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "cavi/low_rank.hpp"
#include "common/errors.hpp"

namespace neuralsurv::cavi {

Covariance Covariance::identity(Eigen::Index m) {
  return from_dense(Eigen::MatrixXd::Identity(m, m));
}

Covariance Covariance::from_dense(Eigen::MatrixXd sigma) {
  if (sigma.rows() != sigma.cols()) throw InputError("covariance must be square");
  Covariance c;
  c.m_ = sigma.rows();
  c.dense_ = true;
  c.sigma_ = std::move(sigma);
  return c;
}

Covariance Covariance::from_precision_factor(const Eigen::MatrixXd& W, Eigen::Index dense_limit) {
  const Eigen::Index m = W.rows();
  if (m > W.cols()) {
    Covariance c;
    c.m_ = m;
    c.dense_ = false;
    c.W_ = W;
    c.L_ = capacitance_cholesky(W);
    if (m <= dense_limit) {
      c.sigma_ = c.to_dense();
      c.dense_ = true;
      c.W_.resize(0, 0);
      c.L_.resize(0, 0);
    }
    return c;
  }
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(m, m);
  P.selfadjointView<Eigen::Lower>().rankUpdate(W);
  Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(P);
  if (llt.info() != Eigen::Success) throw NumericalError("posterior precision is not positive definite");
  Eigen::MatrixXd S = llt.solve(Eigen::MatrixXd::Identity(m, m));
  S = 0.5 * (S + S.transpose()).eval();
  return from_dense(std::move(S));
}

Eigen::MatrixXd Covariance::to_dense() const {
  if (dense_) return sigma_;
  const Eigen::MatrixXd V = L_.triangularView<Eigen::Lower>().solve(W_.transpose());
  Eigen::MatrixXd S = Eigen::MatrixXd::Identity(m_, m_);
  S.selfadjointView<Eigen::Lower>().rankUpdate(V.transpose(), -1.0);
  S.triangularView<Eigen::StrictlyUpper>() = S.transpose();
  return S;
}

Eigen::VectorXd Covariance::diagonal() const {
  if (dense_) return sigma_.diagonal();
  const Eigen::MatrixXd V = L_.triangularView<Eigen::Lower>().solve(W_.transpose());
  return Eigen::VectorXd::Ones(m_) - V.colwise().squaredNorm().transpose();
}

Eigen::VectorXd Covariance::apply(const Eigen::VectorXd& v) const {
  if (dense_) return sigma_ * v;
  Eigen::VectorXd u = W_.transpose() * v;
  L_.triangularView<Eigen::Lower>().solveInPlace(u);
  L_.triangularView<Eigen::Lower>().transpose().solveInPlace(u);
  return v - W_ * u;
}

Eigen::VectorXd Covariance::quadratic_forms(const Eigen::MatrixXd& J) const {
  if (J.rows() != m_) throw InputError("covariance: Jacobian row count mismatch");
  if (dense_) return (J.cwiseProduct(sigma_ * J)).colwise().sum().transpose();
  Eigen::MatrixXd V = W_.transpose() * J;
  L_.triangularView<Eigen::Lower>().solveInPlace(V);
  return (J.colwise().squaredNorm() - V.colwise().squaredNorm()).transpose();
}

Eigen::MatrixXd Covariance::transform_normals(const Eigen::MatrixXd& Z) const {
  if (Z.rows() != m_) throw InputError("covariance: draw dimension mismatch");
  if (dense_) {
    Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(sigma_);
    if (llt.info() == Eigen::Success) return llt.matrixL() * Z;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_);
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * (root.asDiagonal() * (es.eigenvectors().transpose() * Z));
  }
  // W^T W = P Lambda P^T gives W = Q S P^T with Q = W P S^{-1}, and
  // Sigma^{1/2} = I + Q ((1 + S^2)^{-1/2} - 1) Q^T.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W_.transpose() * W_);
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  Eigen::Index keep = 0;
  for (Eigen::Index r = 0; r < lam.size(); ++r) keep += lam[r] > 1e-14 * std::max(1.0, lam.maxCoeff());
  const Eigen::VectorXd s = lam.tail(keep).cwiseSqrt();
  const Eigen::MatrixXd Q = W_ * es.eigenvectors().rightCols(keep) * s.cwiseInverse().asDiagonal();
  const Eigen::VectorXd shrink = (1.0 + lam.tail(keep).array()).rsqrt() - 1.0;
  return Z + Q * (shrink.asDiagonal() * (Q.transpose() * Z));
}

}  // namespace neuralsurv::cavi
