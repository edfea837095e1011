// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "data/dataset.hpp"
#include "map_em/lbfgs.hpp"
#include "model/hazard.hpp"
#include "net/linearized.hpp"
#include "net/mlp.hpp"
#include "numkit/grid.hpp"

namespace neuralsurv::map_em {

struct EmConfig {
  double tolerance = 1e-6;
  int max_iterations = 500;
  // Standard deviation of the random initial theta; 0 starts from theta = 0.
  double init_scale = 0.01;
  std::uint64_t seed = 0;
  LbfgsOptions lbfgs{};
};

// Latent quantities of the augmented model at the current iterate plus the
// iterate itself. Per-point vectors follow the observation-major layout of
// net::training_points.
struct EmState {
  Eigen::VectorXd theta;
  double phi = 1.0;
  Eigen::VectorXd c_breve;       // N; zero for censored observations
  Eigen::VectorXd omega_event;   // N; E[w_i] = pg_mean(1, c_i)
  Eigen::VectorXd lambda_breve;  // P; marginal intensity of the latent process
  Eigen::VectorXd omega_point;   // P; pg_mean(1, |g|) at each point
  int iteration = 0;
  double last_changes[2] = {0.0, 0.0};
};

// Fixed data-side quantities of the EM problem: evaluation points, baseline
// factors t^(rho-1)/Z and the per-point quadrature weights.
class EmProblem {
 public:
  EmProblem(net::MlpModel model, const numkit::QuadratureGrid& grid, const data::Dataset& ds,
            const model::BaselinePrior& prior);

  const net::MlpModel& model() const { return model_; }
  const net::EvaluationPoints& points() const { return pts_; }
  const model::BaselineTerms& baseline() const { return base_; }
  const Eigen::VectorXd& weights() const { return w_; }
  const model::BaselinePrior& prior() const { return prior_; }
  const numkit::QuadratureGrid& grid() const { return *grid_; }
  const data::Dataset& dataset() const { return *ds_; }
  // sum_i int_0^{y_i} t^(rho-1)/Z dt
  double baseline_integral() const { return base_integral_; }

  Eigen::VectorXd g(const Eigen::VectorXd& theta) const;
  // Quadrature log p(D | theta, phi) + log p(theta) + log p(phi), up to the
  // Gamma/Gaussian normalizing constants.
  double log_posterior(const Eigen::VectorXd& theta, double phi) const;

 private:
  net::MlpModel model_;
  const numkit::QuadratureGrid* grid_;
  const data::Dataset* ds_;
  model::BaselinePrior prior_;
  net::EvaluationPoints pts_;
  model::BaselineTerms base_;
  Eigen::VectorXd w_;
  double base_integral_ = 0.0;
};

EmState em_latent_update(const EmProblem& prob, const Eigen::VectorXd& theta, double phi);

// Shape/rate of the Gamma kernel of Q in phi: (a - 1) log phi - b phi.
struct PhiKernel {
  double a;
  double b;
};
PhiKernel phi_kernel(const EmProblem& prob, const EmState& state);

// Q(theta, phi | state) without the state-only entropy constant.
double q_function(const EmProblem& prob, const EmState& state, const Eigen::VectorXd& theta, double phi);
// theta-gradient of q_function.
Eigen::VectorXd q_gradient(const EmProblem& prob, const EmState& state, const Eigen::VectorXd& theta);

struct MStepResult {
  Eigen::VectorXd theta;
  double phi;
  int inner_iterations;
  std::string message;
};
MStepResult em_m_step(const EmProblem& prob, const EmState& state, const LbfgsOptions& opt = {});

struct EmTraceEntry {
  int iteration;
  double log_posterior;
  double q_before;
  double q_after;
  double phi;
  double theta_norm;
  int inner_iterations;
};

struct EmResult {
  Eigen::VectorXd theta_map;
  double phi_map = 1.0;
  bool converged = false;
  int iterations = 0;
  double log_posterior = 0.0;
  std::vector<EmTraceEntry> trace;
};

// The initial theta for a run: N(0, init_scale^2 I) from the seed.
Eigen::VectorXd em_initial_theta(const net::MlpModel& model, const EmConfig& cfg);

EmResult run_em(const EmProblem& prob, const EmConfig& cfg);
EmResult run_em(const EmProblem& prob, const EmConfig& cfg, Eigen::VectorXd theta0, double phi0);

std::string trace_json(const EmResult& r);

}  // namespace neuralsurv::map_em
