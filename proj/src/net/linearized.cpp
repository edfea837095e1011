// Licensed under the Apache License 2.0 (see LICENSE file).

#include "net/linearized.hpp"

#include "common/errors.hpp"
#include "common/parallel.hpp"

namespace neuralsurv::net {

EvaluationPoints training_points(const numkit::QuadratureGrid& grid, const data::Dataset& ds) {
  const std::size_t N = ds.size();
  if (grid.observation_count() != N) throw InputError("grid and dataset sizes differ");
  EvaluationPoints pts;
  pts.offset.resize(N + 1, 0);
  for (std::size_t i = 0; i < N; ++i) pts.offset[i + 1] = pts.offset[i] + grid.cutoff(i) + 1;
  const std::size_t P = pts.offset.back();
  const auto p = static_cast<Eigen::Index>(ds.covariate_count());
  pts.time.resize(P);
  pts.inputs.resize(p + 1, static_cast<Eigen::Index>(P));
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t k = 0; k < pts.count(i); ++k) {
      const std::size_t q = pts.begin(i) + k;
      pts.time[q] = k < grid.cutoff(i) ? grid.node(k) : grid.endpoint(i);
      const auto col = static_cast<Eigen::Index>(q);
      pts.inputs(0, col) = pts.time[q];
      pts.inputs.col(col).tail(p) = ds.X.row(static_cast<Eigen::Index>(i)).transpose();
    }
  }
  return pts;
}

EvaluationPoints curve_points(std::span<const double> times, const Eigen::MatrixXd& X) {
  const auto N = static_cast<std::size_t>(X.rows());
  const std::size_t T = times.size();
  EvaluationPoints pts;
  pts.offset.resize(N + 1);
  for (std::size_t i = 0; i <= N; ++i) pts.offset[i] = i * T;
  pts.time.resize(N * T);
  pts.inputs.resize(X.cols() + 1, static_cast<Eigen::Index>(N * T));
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t k = 0; k < T; ++k) {
      const auto col = static_cast<Eigen::Index>(i * T + k);
      pts.time[i * T + k] = times[k];
      pts.inputs(0, col) = times[k];
      pts.inputs.col(col).tail(X.cols()) = X.row(static_cast<Eigen::Index>(i)).transpose();
    }
  return pts;
}

PointEvaluation evaluate_points(const MlpModel& model, std::span<const double> theta, const EvaluationPoints& pts,
                                bool with_jacobian) {
  PointEvaluation out;
  const auto P = static_cast<Eigen::Index>(pts.size());
  out.g.resize(P);
  if (with_jacobian) out.J.resize(static_cast<Eigen::Index>(model.parameter_count()), P);
  parallel_for(pts.observation_count(), [&](std::size_t i) {
    const auto b = static_cast<Eigen::Index>(pts.begin(i));
    const auto n = static_cast<Eigen::Index>(pts.count(i));
    if (n == 0) return;
    const auto cache = model.forward_batch(pts.inputs.middleCols(b, n), theta);
    out.g.segment(b, n) = cache.output;
    if (with_jacobian) out.J.middleCols(b, n) = model.jacobian_batch(cache, theta);
  });
  return out;
}

LinearizedModel::LinearizedModel(MlpModel model, Eigen::VectorXd theta_map, EvaluationPoints points)
    : model_(std::move(model)), theta_map_(std::move(theta_map)), points_(std::move(points)) {
  if (!theta_map_.allFinite()) throw NumericalError("linearize: expansion point is not finite");
  auto eval = evaluate_points(model_, {theta_map_.data(), static_cast<std::size_t>(theta_map_.size())}, points_, true);
  g_ = std::move(eval.g);
  J_ = std::move(eval.J);
}

double LinearizedModel::value(std::size_t point, const Eigen::VectorXd& theta) const {
  const auto q = static_cast<Eigen::Index>(point);
  return g_[q] + J_.col(q).dot(theta - theta_map_);
}

Eigen::VectorXd LinearizedModel::values(const Eigen::VectorXd& theta) const {
  return g_ + J_.transpose() * (theta - theta_map_);
}

LinearizedModel linearize(const MlpModel& model, const Eigen::VectorXd& theta_map, const numkit::QuadratureGrid& grid,
                          const data::Dataset& ds) {
  return LinearizedModel(model, theta_map, training_points(grid, ds));
}

}  // namespace neuralsurv::net
