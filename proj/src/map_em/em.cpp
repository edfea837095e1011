// Licensed under the Apache License 2.0 (see LICENSE file).

#include "map_em/em.hpp"

#include <cmath>
#include <utility>

#include "common/errors.hpp"
#include "json.hpp"
#include "numkit/rng.hpp"
#include "numkit/special.hpp"

namespace neuralsurv::map_em {

EmProblem::EmProblem(net::MlpModel model, const numkit::QuadratureGrid& grid, const data::Dataset& ds,
                     const model::BaselinePrior& prior)
    : model_(std::move(model)), grid_(&grid), ds_(&ds), prior_(prior) {
  ds.validate();
  if (ds.size() != grid.observation_count()) throw InputError("em: grid and dataset sizes differ");
  if (ds.covariate_count() != model_.covariate_dim()) throw InputError("em: covariate count does not match network");
  pts_ = net::training_points(grid, ds);
  base_ = model::baseline_terms(model_, pts_, prior_, grid.horizon());
  w_.resize(static_cast<Eigen::Index>(pts_.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto wi = grid.weights(i);
    for (std::size_t k = 0; k + 1 < pts_.count(i); ++k) w_[static_cast<Eigen::Index>(pts_.begin(i) + k)] = wi[k];
    w_[static_cast<Eigen::Index>(pts_.last(i))] = grid.endpoint_weight(i);
  }
  base_integral_ = w_.dot(base_.factor);
}

Eigen::VectorXd EmProblem::g(const Eigen::VectorXd& theta) const {
  return model_.forward_batch(pts_.inputs, {theta.data(), static_cast<std::size_t>(theta.size())}).output;
}

double EmProblem::log_posterior(const Eigen::VectorXd& theta, double phi) const {
  const double ll = model::log_likelihood_from_g(g(theta), base_, phi, pts_, *grid_, *ds_);
  return ll - 0.5 * theta.squaredNorm() + (prior_.alpha0 - 1.0) * std::log(phi) - prior_.beta0 * phi;
}

EmState em_latent_update(const EmProblem& prob, const Eigen::VectorXd& theta, double phi) {
  if (!theta.allFinite() || !(phi > 0.0) || !std::isfinite(phi)) throw NumericalError("em: non-finite iterate");
  const auto& ds = prob.dataset();
  const auto& pts = prob.points();
  const Eigen::VectorXd g = prob.g(theta);
  EmState s;
  s.theta = theta;
  s.phi = phi;
  const auto n = static_cast<Eigen::Index>(ds.size());
  s.c_breve = Eigen::VectorXd::Zero(n);
  s.omega_event.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (ds.event[ui] == 1) s.c_breve[i] = std::abs(g[static_cast<Eigen::Index>(pts.last(ui))]);
    s.omega_event[i] = numkit::pg_mean(1.0, s.c_breve[i]);
  }
  s.lambda_breve.resize(g.size());
  s.omega_point.resize(g.size());
  for (Eigen::Index q = 0; q < g.size(); ++q) {
    // sigmoid(|g|) exp(-(g + |g|)/2) == sigmoid(-g)
    s.lambda_breve[q] = prob.baseline().factor[q] * phi * numkit::sigmoid(-g[q]);
    s.omega_point[q] = numkit::pg_mean(1.0, std::abs(g[q]));
  }
  return s;
}

PhiKernel phi_kernel(const EmProblem& prob, const EmState& state) {
  const auto& pr = prob.prior();
  return {pr.alpha0 + static_cast<double>(prob.dataset().event_count()) + prob.weights().dot(state.lambda_breve),
          pr.beta0 + prob.baseline_integral()};
}

namespace {

struct QParts {
  double event = 0.0;
  double grid = 0.0;
  double prior_theta = 0.0;
  double phi = 0.0;
};

QParts q_parts(const EmProblem& prob, const EmState& st, const Eigen::VectorXd& g, const Eigen::VectorXd& theta,
               double phi) {
  const auto& ds = prob.dataset();
  const auto& pts = prob.points();
  QParts q;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.event[i] != 1) continue;
    const double gi = g[static_cast<Eigen::Index>(pts.last(i))];
    q.event += 0.5 * gi - 0.5 * gi * gi * st.omega_event[static_cast<Eigen::Index>(i)];
  }
  const auto& w = prob.weights();
  for (Eigen::Index p = 0; p < g.size(); ++p)
    q.grid -= 0.5 * w[p] * st.lambda_breve[p] * (g[p] + g[p] * g[p] * st.omega_point[p]);
  q.prior_theta = -0.5 * theta.squaredNorm();
  const auto k = phi_kernel(prob, st);
  q.phi = (k.a - 1.0) * std::log(phi) - k.b * phi;
  return q;
}

}  // namespace

double q_function(const EmProblem& prob, const EmState& state, const Eigen::VectorXd& theta, double phi) {
  if (!(phi > 0.0)) throw InputError("q_function: phi must be > 0");
  const auto q = q_parts(prob, state, prob.g(theta), theta, phi);
  const std::pair<const char*, double> parts[] = {
      {"event", q.event}, {"grid integral", q.grid}, {"theta prior", q.prior_theta}, {"phi kernel", q.phi}};
  for (const auto& [name, v] : parts)
    if (!std::isfinite(v)) throw NumericalError(std::string("q_function: non-finite ") + name + " term");
  return q.event + q.grid + q.prior_theta + q.phi;
}

namespace {

double theta_part(const EmProblem& prob, const EmState& st, const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
  const auto& ds = prob.dataset();
  const auto& pts = prob.points();
  const auto& w = prob.weights();
  const std::span<const double> th(theta.data(), static_cast<std::size_t>(theta.size()));
  const auto cache = prob.model().forward_batch(pts.inputs, th);
  const Eigen::VectorXd& g = cache.output;
  Eigen::VectorXd cot(g.size());
  double value = -0.5 * theta.squaredNorm();
  for (Eigen::Index p = 0; p < g.size(); ++p) {
    const double lw = 0.5 * w[p] * st.lambda_breve[p];
    value -= lw * (g[p] + g[p] * g[p] * st.omega_point[p]);
    cot[p] = -lw * (1.0 + 2.0 * g[p] * st.omega_point[p]);
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.event[i] != 1) continue;
    const auto p = static_cast<Eigen::Index>(pts.last(i));
    const double om = st.omega_event[static_cast<Eigen::Index>(i)];
    value += 0.5 * g[p] - 0.5 * g[p] * g[p] * om;
    cot[p] += 0.5 - g[p] * om;
  }
  if (grad) *grad = prob.model().vjp(cache, th, cot) - theta;
  return value;
}

}  // namespace

Eigen::VectorXd q_gradient(const EmProblem& prob, const EmState& state, const Eigen::VectorXd& theta) {
  Eigen::VectorXd grad;
  theta_part(prob, state, theta, &grad);
  return grad;
}

MStepResult em_m_step(const EmProblem& prob, const EmState& state, const LbfgsOptions& opt) {
  const auto k = phi_kernel(prob, state);
  const double phi = std::max((k.a - 1.0) / k.b, 1e-12);
  const Objective neg_q = [&](const Eigen::VectorXd& th, Eigen::VectorXd& grad) {
    const double v = theta_part(prob, state, th, &grad);
    grad = -grad;
    return -v;
  };
  auto res = lbfgs_minimize(neg_q, state.theta, opt);
  if (!res.x.allFinite()) throw NumericalError("em m-step: optimizer diverged");
  return {std::move(res.x), phi, res.iterations, res.message};
}

Eigen::VectorXd em_initial_theta(const net::MlpModel& model, const EmConfig& cfg) {
  if (cfg.init_scale < 0.0) throw InputError("em: init_scale must be >= 0");
  Eigen::VectorXd th = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.parameter_count()));
  if (cfg.init_scale == 0.0) return th;
  numkit::RngStream rng = numkit::RngStream(cfg.seed).derive(0x656d);
  for (Eigen::Index j = 0; j < th.size(); ++j) th[j] = rng.normal(0.0, cfg.init_scale);
  return th;
}

EmResult run_em(const EmProblem& prob, const EmConfig& cfg) {
  return run_em(prob, cfg, em_initial_theta(prob.model(), cfg), prob.prior().alpha0 / prob.prior().beta0);
}

EmResult run_em(const EmProblem& prob, const EmConfig& cfg, Eigen::VectorXd theta0, double phi0) {
  if (!(cfg.tolerance > 0.0) || cfg.max_iterations < 1) throw InputError("em: invalid tolerance or iteration cap");
  if (prob.dataset().size() == 0) throw InputError("em: empty dataset");
  EmResult r;
  r.theta_map = std::move(theta0);
  r.phi_map = phi0;
  r.log_posterior = prob.log_posterior(r.theta_map, r.phi_map);
  r.trace.push_back({0, r.log_posterior, 0.0, 0.0, r.phi_map, r.theta_map.norm(), 0});
  int small_steps = 0;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const EmState st = em_latent_update(prob, r.theta_map, r.phi_map);
    const double q_before = q_function(prob, st, r.theta_map, r.phi_map);
    auto ms = em_m_step(prob, st, cfg.lbfgs);
    const double q_after = q_function(prob, st, ms.theta, ms.phi);
    const double lp = prob.log_posterior(ms.theta, ms.phi);
    const double change = std::abs(lp - r.log_posterior) / std::max(std::abs(r.log_posterior), 1e-300);
    r.theta_map = std::move(ms.theta);
    r.phi_map = ms.phi;
    r.log_posterior = lp;
    r.iterations = it;
    r.trace.push_back({it, lp, q_before, q_after, r.phi_map, r.theta_map.norm(), ms.inner_iterations});
    small_steps = change < cfg.tolerance ? small_steps + 1 : 0;
    if (small_steps >= 2) {
      r.converged = true;
      break;
    }
  }
  return r;
}

std::string trace_json(const EmResult& r) {
  nlohmann::json j;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["phi_map"] = r.phi_map;
  auto& arr = j["trace"] = nlohmann::json::array();
  for (const auto& e : r.trace)
    arr.push_back({{"iteration", e.iteration},
                   {"log_posterior", e.log_posterior},
                   {"q_before", e.q_before},
                   {"q_after", e.q_after},
                   {"phi", e.phi},
                   {"theta_norm", e.theta_norm},
                   {"inner_iterations", e.inner_iterations}});
  return j.dump(2);
}

}  // namespace neuralsurv::map_em
