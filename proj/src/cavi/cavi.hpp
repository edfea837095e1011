// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <string>
#include <vector>

#include "cavi/covariance.hpp"
#include "cavi/low_rank.hpp"
#include "data/dataset.hpp"
#include "model/hazard.hpp"
#include "net/linearized.hpp"
#include "numkit/grid.hpp"

namespace neuralsurv::cavi {

// Cached data side of the variational problem: linearization (g, J at theta*)
// on every evaluation point, quadrature weights, baseline factors and the
// event structure. Points are observation-major; last_point[i] is y_i.
struct CaviProblem {
  Eigen::VectorXd g;           // P
  Eigen::MatrixXd J;           // m x P
  Eigen::VectorXd theta_star;  // m
  Eigen::VectorXd weight;      // P quadrature weights
  Eigen::VectorXd factor;      // P values of t^(rho-1)/Z
  std::vector<std::size_t> last_point;
  std::vector<int> event;
  model::BaselinePrior prior;

  std::size_t observation_count() const { return event.size(); }
  Eigen::Index point_count() const { return g.size(); }
  Eigen::Index parameter_count() const { return theta_star.size(); }
  void validate() const;
};

CaviProblem make_problem(const net::LinearizedModel& lin, const model::BaselinePrior& prior,
                         const numkit::QuadratureGrid& grid, const data::Dataset& ds);

struct VariationalState {
  double alpha = 1.0;
  double beta = 1.0;
  double e_log_phi = 0.0;
  Eigen::VectorXd mu;
  Covariance sigma;
  Eigen::VectorXd c_tilde;   // N
  Eigen::VectorXd omega;     // N, E[w_i]
  Eigen::VectorXd lambda_q;  // P
  Eigen::VectorXd m_tilde;   // P
  Eigen::VectorXd s_tilde;   // P
  int iteration = 0;

  double mean_phi() const { return alpha / beta; }
};

struct CaviConfig {
  double tolerance = 1e-6;
  int max_iterations = 1000;
  Eigen::Index dense_limit = 5000;
};

// alpha = phi_map * beta, mu = theta_map, Sigma = I, with moments to match.
VariationalState cavi_initial_state(const CaviProblem& prob, const Eigen::VectorXd& theta_map, double phi_map);

// m = g + J^T (mu - theta*), s^2 = m^2 + diag(J^T Sigma J).
void refresh_moments(const CaviProblem& prob, VariationalState& st);

void update_omega(const CaviProblem& prob, VariationalState& st);
// Returns the number of points whose exponent was clamped.
std::size_t update_psi(const CaviProblem& prob, VariationalState& st);
void update_phi(const CaviProblem& prob, VariationalState& st);
void update_theta(const CaviProblem& prob, VariationalState& st, Eigen::Index dense_limit = 5000);

// Event-time columns for every observation followed by one column per
// evaluation point, with weights delta_i E[w_i] and v lambda^Q pg_mean(1, s).
LowRankFactor theta_factor(const CaviProblem& prob, const VariationalState& st);
// Same B with each observation's endpoint column carrying both weights.
LowRankFactor merged_theta_factor(const CaviProblem& prob, const VariationalState& st);
// The linear term A of the theta-update (mu = 1/2 B^{-1} A).
Eigen::VectorXd theta_linear_term(const CaviProblem& prob, const VariationalState& st);

struct CaviTraceEntry {
  int iteration;
  double max_change;
  double alpha;
  double beta;
  double mean_phi;
  std::size_t clamped;
};

struct CaviResult {
  VariationalState state;
  bool converged = false;
  int iterations = 0;
  std::vector<CaviTraceEntry> trace;
  // Set when a sweep produced a non-finite state; state then holds the last finite iterate.
  std::string error;
};

// One full sweep omega -> Psi -> phi -> theta. Returns the largest relative
// change over (alpha, mu, diag Sigma, c).
double cavi_sweep(const CaviProblem& prob, VariationalState& st, const CaviConfig& cfg, std::size_t* clamped = nullptr);

CaviResult run_cavi(const CaviProblem& prob, const Eigen::VectorXd& theta_map, double phi_map,
                    const CaviConfig& cfg = {});

std::string trace_json(const CaviResult& r);

}  // namespace neuralsurv::cavi
