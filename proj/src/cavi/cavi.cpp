// Licensed under the Apache License 2.0 (see LICENSE file).

#include "cavi/cavi.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "common/errors.hpp"
#include "json.hpp"
#include "numkit/special.hpp"

namespace neuralsurv::cavi {

void CaviProblem::validate() const {
  const Eigen::Index p = g.size();
  if (J.cols() != p || weight.size() != p || factor.size() != p || J.rows() != theta_star.size())
    throw InputError("cavi problem: inconsistent shapes");
  if (last_point.size() != event.size()) throw InputError("cavi problem: event structure mismatch");
  for (auto q : last_point)
    if (static_cast<Eigen::Index>(q) >= p) throw InputError("cavi problem: endpoint index out of range");
  prior.validate();
}

CaviProblem make_problem(const net::LinearizedModel& lin, const model::BaselinePrior& prior,
                         const numkit::QuadratureGrid& grid, const data::Dataset& ds) {
  const auto& pts = lin.points();
  if (pts.observation_count() != ds.size() || grid.observation_count() != ds.size())
    throw InputError("cavi: linearization, grid and dataset sizes differ");
  CaviProblem prob;
  prob.g = lin.g();
  prob.J = lin.jacobians();
  prob.theta_star = lin.theta_map();
  prob.prior = prior;
  prob.factor = model::baseline_terms(lin.model(), pts, prior, grid.horizon()).factor;
  prob.weight.resize(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto wi = grid.weights(i);
    for (std::size_t k = 0; k + 1 < pts.count(i); ++k) prob.weight[static_cast<Eigen::Index>(pts.begin(i) + k)] = wi[k];
    prob.weight[static_cast<Eigen::Index>(pts.last(i))] = grid.endpoint_weight(i);
    prob.last_point.push_back(pts.last(i));
  }
  prob.event = ds.event;
  return prob;
}

VariationalState cavi_initial_state(const CaviProblem& prob, const Eigen::VectorXd& theta_map, double phi_map) {
  prob.validate();
  if (theta_map.size() != prob.parameter_count()) throw InputError("cavi: theta_map has the wrong length");
  if (!(phi_map > 0.0)) throw InputError("cavi: phi_map must be > 0");
  VariationalState st;
  st.beta = prob.prior.beta0 + prob.weight.dot(prob.factor);
  st.alpha = phi_map * st.beta;
  st.e_log_phi = numkit::digamma(st.alpha) - std::log(st.beta);
  st.mu = theta_map;
  st.sigma = Covariance::identity(prob.parameter_count());
  st.c_tilde = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(prob.observation_count()));
  st.omega = Eigen::VectorXd::Constant(st.c_tilde.size(), 0.25);
  st.lambda_q = Eigen::VectorXd::Zero(prob.point_count());
  refresh_moments(prob, st);
  return st;
}

void refresh_moments(const CaviProblem& prob, VariationalState& st) {
  st.m_tilde = prob.g + prob.J.transpose() * (st.mu - prob.theta_star);
  const Eigen::VectorXd var = st.sigma.quadratic_forms(prob.J).cwiseMax(0.0);
  st.s_tilde = (st.m_tilde.array().square() + var.array()).sqrt().matrix();
}

void update_omega(const CaviProblem& prob, VariationalState& st) {
  const auto n = static_cast<Eigen::Index>(prob.observation_count());
  st.c_tilde.resize(n);
  st.omega.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    st.c_tilde[i] = prob.event[ui] == 1 ? st.s_tilde[static_cast<Eigen::Index>(prob.last_point[ui])] : 0.0;
    st.omega[i] = numkit::pg_mean(1.0, st.c_tilde[i]);
  }
}

std::size_t update_psi(const CaviProblem& prob, VariationalState& st) {
  constexpr double kMaxExponent = 700.0;
  std::size_t clamped = 0;
  st.lambda_q.resize(prob.point_count());
  for (Eigen::Index q = 0; q < prob.point_count(); ++q) {
    double e = -0.5 * (st.m_tilde[q] + st.s_tilde[q]) + st.e_log_phi;
    if (e > kMaxExponent) {
      e = kMaxExponent;
      ++clamped;
    }
    st.lambda_q[q] = prob.factor[q] * numkit::sigmoid(st.s_tilde[q]) * std::exp(e);
  }
  if (clamped > 0)
    std::cerr << "warning: cavi intensity exponent clamped at " << kMaxExponent << " on " << clamped << " points\n";
  return clamped;
}

void update_phi(const CaviProblem& prob, VariationalState& st) {
  double events = 0.0;
  for (int d : prob.event) events += d;
  st.alpha = prob.prior.alpha0 + events + prob.weight.dot(st.lambda_q);
  st.e_log_phi = numkit::digamma(st.alpha) - std::log(st.beta);
}

namespace {

Eigen::VectorXd grid_weights(const CaviProblem& prob, const VariationalState& st) {
  Eigen::VectorXd c(prob.point_count());
  for (Eigen::Index q = 0; q < c.size(); ++q)
    c[q] = prob.weight[q] * st.lambda_q[q] * numkit::pg_mean(1.0, st.s_tilde[q]);
  return c;
}

}  // namespace

LowRankFactor theta_factor(const CaviProblem& prob, const VariationalState& st) {
  const auto n = static_cast<Eigen::Index>(prob.observation_count());
  const Eigen::Index p = prob.point_count();
  LowRankFactor f{Eigen::MatrixXd(prob.parameter_count(), n + p), Eigen::VectorXd(n + p)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    f.U.col(i) = prob.J.col(static_cast<Eigen::Index>(prob.last_point[ui]));
    f.c[i] = prob.event[ui] * st.omega[i];
  }
  f.U.rightCols(p) = prob.J;
  f.c.tail(p) = grid_weights(prob, st);
  return f;
}

LowRankFactor merged_theta_factor(const CaviProblem& prob, const VariationalState& st) {
  LowRankFactor f{prob.J, grid_weights(prob, st)};
  for (std::size_t i = 0; i < prob.observation_count(); ++i)
    if (prob.event[i] == 1) f.c[static_cast<Eigen::Index>(prob.last_point[i])] += st.omega[static_cast<Eigen::Index>(i)];
  return f;
}

Eigen::VectorXd theta_linear_term(const CaviProblem& prob, const VariationalState& st) {
  // Per-point coefficients r with A = J r.
  const Eigen::VectorXd a = prob.g - prob.J.transpose() * prob.theta_star;
  Eigen::VectorXd r(prob.point_count());
  for (Eigen::Index q = 0; q < r.size(); ++q)
    r[q] = -prob.weight[q] * st.lambda_q[q] * (0.5 + numkit::pg_mean(1.0, st.s_tilde[q]) * a[q]);
  for (std::size_t i = 0; i < prob.observation_count(); ++i) {
    if (prob.event[i] != 1) continue;
    const auto q = static_cast<Eigen::Index>(prob.last_point[i]);
    r[q] += 0.5 - st.omega[static_cast<Eigen::Index>(i)] * a[q];
  }
  return prob.J * r;
}

void update_theta(const CaviProblem& prob, VariationalState& st, Eigen::Index dense_limit) {
  const Eigen::VectorXd A = theta_linear_term(prob, st);
  const LowRankFactor f = merged_theta_factor(prob, st).compressed();
  st.sigma = Covariance::from_precision_factor(f.scaled(), dense_limit);
  st.mu = st.sigma.apply(A);
  if (!st.mu.allFinite()) throw NumericalError("cavi: non-finite variational mean");
  refresh_moments(prob, st);
}

namespace {

double relative_change(const Eigen::VectorXd& now, const Eigen::VectorXd& before) {
  const double denom = before.norm();
  const double diff = (now - before).norm();
  if (denom == 0.0) return diff == 0.0 ? 0.0 : diff;
  return diff / denom;
}

}  // namespace

double cavi_sweep(const CaviProblem& prob, VariationalState& st, const CaviConfig& cfg, std::size_t* clamped) {
  const double alpha0 = st.alpha;
  const Eigen::VectorXd mu0 = st.mu;
  const Eigen::VectorXd diag0 = st.sigma.diagonal();
  const Eigen::VectorXd c0 = st.c_tilde;
  update_omega(prob, st);
  const std::size_t n_clamped = update_psi(prob, st);
  update_phi(prob, st);
  update_theta(prob, st, cfg.dense_limit);
  ++st.iteration;
  if (clamped) *clamped = n_clamped;
  const double changes[] = {std::abs(st.alpha - alpha0) / std::abs(alpha0), relative_change(st.mu, mu0),
                            relative_change(st.sigma.diagonal(), diag0), relative_change(st.c_tilde, c0)};
  return *std::max_element(std::begin(changes), std::end(changes));
}

CaviResult run_cavi(const CaviProblem& prob, const Eigen::VectorXd& theta_map, double phi_map, const CaviConfig& cfg) {
  if (!(cfg.tolerance > 0.0) || cfg.max_iterations < 1) throw InputError("cavi: invalid tolerance or iteration cap");
  CaviResult r;
  r.state = cavi_initial_state(prob, theta_map, phi_map);
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    VariationalState before = r.state;
    std::size_t clamped = 0;
    double change = 0.0;
    try {
      change = cavi_sweep(prob, r.state, cfg, &clamped);
    } catch (const NumericalError& e) {
      r.state = std::move(before);
      r.error = std::string(e.what()) + " (cavi iteration " + std::to_string(it) + ")";
      break;
    }
    if (!std::isfinite(change) || !std::isfinite(r.state.alpha)) {
      r.state = std::move(before);
      r.error = "cavi: non-finite state at iteration " + std::to_string(it);
      break;
    }
    r.iterations = it;
    r.trace.push_back({it, change, r.state.alpha, r.state.beta, r.state.mean_phi(), clamped});
    if (change < cfg.tolerance) {
      r.converged = true;
      break;
    }
  }
  return r;
}

std::string trace_json(const CaviResult& r) {
  nlohmann::json j;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  auto& arr = j["trace"] = nlohmann::json::array();
  for (const auto& e : r.trace)
    arr.push_back({{"iteration", e.iteration},
                   {"max_change", e.max_change},
                   {"alpha", e.alpha},
                   {"beta", e.beta},
                   {"mean_phi", e.mean_phi},
                   {"clamped", e.clamped}});
  return j.dump(2);
}

}  // namespace neuralsurv::cavi
