// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>

#include "data/dataset.hpp"
#include "net/linearized.hpp"
#include "net/mlp.hpp"
#include "numkit/grid.hpp"

namespace neuralsurv::model {

// Gamma(alpha0, beta0) prior on phi and the Weibull power rho of the
// baseline phi * t^(rho-1).
struct BaselinePrior {
  double alpha0 = 1.0;
  double beta0 = 1.0;
  double rho = 1.0;

  void validate() const;
};

// Z(t, x) = E_{theta ~ N(0, I)}[sigmoid(g_lin(t, x; theta))] with the
// expansion taken at theta* = 0 and the probit-style approximation
// E[sigmoid(X)] ~ sigmoid(mu / sqrt(1 + pi/8 s^2)).
double normalizer_Z(const net::MlpModel& model, double t, std::span<const double> x);

// Z for every column of an evaluation point set.
Eigen::VectorXd normalizer_Z(const net::MlpModel& model, const net::EvaluationPoints& pts);

// t^(rho-1). For rho < 1 the singular value at t = 0 is replaced by the value
// at 1e-12 * horizon.
double time_power(double t, double rho, double horizon);

// Data-only part of the baseline at every evaluation point:
// factor = t^(rho-1) / Z(t, x_i), so that lambda_0 = phi * factor.
struct BaselineTerms {
  Eigen::VectorXd z;
  Eigen::VectorXd factor;
};
BaselineTerms baseline_terms(const net::MlpModel& model, const net::EvaluationPoints& pts, const BaselinePrior& prior,
                             double horizon);

// Everything needed to evaluate the hazard of the linearized model on the
// training points.
class HazardContext {
 public:
  HazardContext(const net::LinearizedModel& lin, const BaselinePrior& prior, const numkit::QuadratureGrid& grid,
                const data::Dataset& ds);

  const net::LinearizedModel& linearized() const { return *lin_; }
  const BaselinePrior& prior() const { return prior_; }
  const numkit::QuadratureGrid& grid() const { return *grid_; }
  const data::Dataset& dataset() const { return *ds_; }
  const BaselineTerms& baseline() const { return base_; }
  double horizon() const { return grid_->horizon(); }

  // phi t^(rho-1) / Z(t, x_i) * sigmoid(g_lin(t, x_i; theta)) at an arbitrary t >= 0.
  double hazard(double phi, const Eigen::VectorXd& theta, double t, std::size_t obs) const;
  // Baseline lambda_0(t, x_i; phi) at an arbitrary t.
  double baseline(double phi, double t, std::size_t obs) const;

 private:
  const net::LinearizedModel* lin_;
  BaselinePrior prior_;
  const numkit::QuadratureGrid* grid_;
  const data::Dataset* ds_;
  BaselineTerms base_;
};

// sum_i delta_i log lambda(y_i) - int_0^{y_i} lambda dt, integrals by the
// shared trapezoid grid, given g at every training point (observation-major
// layout of net::training_points). Throws NumericalError naming the
// observation on a non-finite term.
double log_likelihood_from_g(const Eigen::VectorXd& g, const BaselineTerms& base, double phi,
                             const net::EvaluationPoints& pts, const numkit::QuadratureGrid& grid,
                             const data::Dataset& ds);

// Log-likelihood of the linearized model at (phi, theta).
double log_likelihood(const HazardContext& ctx, double phi, const Eigen::VectorXd& theta);

}  // namespace neuralsurv::model
