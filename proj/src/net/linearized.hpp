// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

#include "data/dataset.hpp"
#include "net/mlp.hpp"
#include "numkit/grid.hpp"

namespace neuralsurv::net {

// Observation-major list of (t, x_i) evaluation points. For training data,
// observation i owns its grid nodes t_1..t_{K_i} followed by its endpoint y_i,
// so last(i) is always the event-time point.
struct EvaluationPoints {
  std::vector<std::size_t> offset;  // size N+1
  std::vector<double> time;         // size P
  Eigen::MatrixXd inputs;           // (p+1) x P

  std::size_t observation_count() const { return offset.size() - 1; }
  std::size_t size() const { return time.size(); }
  std::size_t begin(std::size_t i) const { return offset[i]; }
  std::size_t end(std::size_t i) const { return offset[i + 1]; }
  std::size_t count(std::size_t i) const { return offset[i + 1] - offset[i]; }
  std::size_t last(std::size_t i) const { return offset[i + 1] - 1; }
};

// Grid nodes below y_i plus y_i itself, for every training observation.
EvaluationPoints training_points(const numkit::QuadratureGrid& grid, const data::Dataset& ds);

// The same time axis for every row of X (prediction curves).
EvaluationPoints curve_points(std::span<const double> times, const Eigen::MatrixXd& X);

// Batched g and per-point Jacobians at theta, computed observation by
// observation (parallelizable, deterministic).
struct PointEvaluation {
  Eigen::VectorXd g;  // P
  Eigen::MatrixXd J;  // m x P
};
PointEvaluation evaluate_points(const MlpModel& model, std::span<const double> theta, const EvaluationPoints& pts,
                                bool with_jacobian);

// First-order expansion of g around theta_map:
// g_lin(t, x; theta) = g(t, x; theta_map) + J(t, x)^T (theta - theta_map),
// with g and J cached on a fixed point set.
class LinearizedModel {
 public:
  LinearizedModel(MlpModel model, Eigen::VectorXd theta_map, EvaluationPoints points);

  const MlpModel& model() const { return model_; }
  const Eigen::VectorXd& theta_map() const { return theta_map_; }
  const EvaluationPoints& points() const { return points_; }
  const Eigen::VectorXd& g() const { return g_; }
  const Eigen::MatrixXd& jacobians() const { return J_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(theta_map_.size()); }

  double value(std::size_t point, const Eigen::VectorXd& theta) const;
  Eigen::VectorXd values(const Eigen::VectorXd& theta) const;

 private:
  MlpModel model_;
  Eigen::VectorXd theta_map_;
  EvaluationPoints points_;
  Eigen::VectorXd g_;
  Eigen::MatrixXd J_;
};

LinearizedModel linearize(const MlpModel& model, const Eigen::VectorXd& theta_map, const numkit::QuadratureGrid& grid,
                          const data::Dataset& ds);

}  // namespace neuralsurv::net
