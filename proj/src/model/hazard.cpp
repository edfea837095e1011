// Licensed under the Apache License 2.0 (see LICENSE file).

#include "model/hazard.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "common/errors.hpp"
#include "numkit/special.hpp"

namespace neuralsurv::model {

void BaselinePrior::validate() const {
  if (!(alpha0 > 0.0) || !(beta0 > 0.0) || !(rho > 0.0))
    throw InputError("prior: alpha0, beta0 and rho must all be > 0");
}

namespace {

double z_closed_form(double g0, double jac_sq_norm) {
  return numkit::sigmoid(g0 / std::sqrt(1.0 + std::numbers::pi / 8.0 * jac_sq_norm));
}

}  // namespace

double normalizer_Z(const net::MlpModel& model, double t, std::span<const double> x) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.parameter_count()));
  const std::span<const double> theta0(zero.data(), model.parameter_count());
  const double g0 = model.forward(t, x, theta0);
  const Eigen::VectorXd J0 = model.jacobian(t, x, theta0);
  // Linearizing at theta* = 0: mean g(t,x;0), variance ||J_0||^2.
  return z_closed_form(g0, J0.squaredNorm());
}

Eigen::VectorXd normalizer_Z(const net::MlpModel& model, const net::EvaluationPoints& pts) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.parameter_count()));
  const auto eval = net::evaluate_points(model, {zero.data(), model.parameter_count()}, pts, true);
  Eigen::VectorXd z(eval.g.size());
  for (Eigen::Index q = 0; q < z.size(); ++q) z[q] = z_closed_form(eval.g[q], eval.J.col(q).squaredNorm());
  return z;
}

double time_power(double t, double rho, double horizon) {
  if (t < 0.0) throw InputError("time must be >= 0");
  if (rho == 1.0) return 1.0;
  if (t == 0.0 && rho < 1.0) t = 1e-12 * horizon;
  return std::pow(t, rho - 1.0);
}

BaselineTerms baseline_terms(const net::MlpModel& model, const net::EvaluationPoints& pts, const BaselinePrior& prior,
                             double horizon) {
  prior.validate();
  BaselineTerms b;
  b.z = normalizer_Z(model, pts);
  b.factor.resize(b.z.size());
  for (Eigen::Index q = 0; q < b.z.size(); ++q) {
    if (!(b.z[q] > 0.0)) throw NumericalError("normalizer underflowed to zero at point " + std::to_string(q));
    b.factor[q] = time_power(pts.time[static_cast<std::size_t>(q)], prior.rho, horizon) / b.z[q];
  }
  return b;
}

HazardContext::HazardContext(const net::LinearizedModel& lin, const BaselinePrior& prior,
                             const numkit::QuadratureGrid& grid, const data::Dataset& ds)
    : lin_(&lin), prior_(prior), grid_(&grid), ds_(&ds) {
  prior_.validate();
  base_ = baseline_terms(lin.model(), lin.points(), prior_, grid.horizon());
}

double HazardContext::baseline(double phi, double t, std::size_t obs) const {
  if (!(phi > 0.0)) throw InputError("hazard: phi must be > 0");
  const auto x = ds_->covariates(obs);
  return phi * time_power(t, prior_.rho, horizon()) / normalizer_Z(lin_->model(), t, x);
}

double HazardContext::hazard(double phi, const Eigen::VectorXd& theta, double t, std::size_t obs) const {
  const double base = baseline(phi, t, obs);
  const auto x = ds_->covariates(obs);
  const auto& m = lin_->model();
  const auto& tm = lin_->theta_map();
  const std::span<const double> star(tm.data(), static_cast<std::size_t>(tm.size()));
  const double g_lin = m.forward(t, x, star) + m.jacobian(t, x, star).dot(theta - tm);
  return base * numkit::sigmoid(g_lin);
}

double log_likelihood_from_g(const Eigen::VectorXd& g, const BaselineTerms& base, double phi,
                             const net::EvaluationPoints& pts, const numkit::QuadratureGrid& grid,
                             const data::Dataset& ds) {
  if (!(phi > 0.0)) throw InputError("log_likelihood: phi must be > 0");
  double total = 0.0;
  std::vector<double> integrand;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::size_t b = pts.begin(i);
    const std::size_t n = pts.count(i);
    integrand.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto q = static_cast<Eigen::Index>(b + k);
      integrand[k] = phi * base.factor[q] * numkit::sigmoid(g[q]);
    }
    double term = -grid.integrate(i, integrand, integrand.back());
    if (ds.event[i] == 1) {
      const auto q = static_cast<Eigen::Index>(pts.last(i));
      term += std::log(phi * base.factor[q]) + numkit::log_sigmoid(g[q]);
    }
    if (!std::isfinite(term))
      throw NumericalError("log_likelihood: non-finite contribution from observation " + std::to_string(i));
    total += term;
  }
  return total;
}

double log_likelihood(const HazardContext& ctx, double phi, const Eigen::VectorXd& theta) {
  const auto& lin = ctx.linearized();
  return log_likelihood_from_g(lin.values(theta), ctx.baseline(), phi, lin.points(), ctx.grid(), ctx.dataset());
}

}  // namespace neuralsurv::model
