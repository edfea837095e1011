// Licensed under the Apache License 2.0 (see LICENSE file).

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "common/errors.hpp"
#include "data/dataset.hpp"
#include "doctest.h"
#include "map_em/em.hpp"
#include "map_em/lbfgs.hpp"
#include "net/mlp.hpp"
#include "numkit/grid.hpp"
#include "numkit/rng.hpp"

using namespace neuralsurv;
using namespace neuralsurv::map_em;

namespace {

std::span<const double> sp(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

data::Dataset synthetic(std::size_t n, std::uint64_t seed) {
  numkit::RngStream rng(seed);
  const data::Dataset raw = data::gen_synthetic(n, rng);
  return data::normalize_time(data::FeatureScaling::fit(raw).apply(raw), raw.max_time());
}

Eigen::VectorXd random_theta(std::size_t m, std::uint64_t seed, double sd) {
  numkit::RngStream rng(seed);
  Eigen::VectorXd th(static_cast<Eigen::Index>(m));
  for (Eigen::Index j = 0; j < th.size(); ++j) th[j] = rng.normal(0.0, sd);
  return th;
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double tilted_mean(double c) { return c == 0.0 ? 0.25 : std::tanh(c / 2.0) / (2.0 * c); }

// Q written out observation by observation from the augmented complete-data
// likelihood, using the default architecture (Z = 1/2) and rho = 1.
double q_oracle(const net::MlpModel& model, const numkit::QuadratureGrid& grid, const data::Dataset& ds,
                const Eigen::VectorXd& theta_old, double phi_old, const Eigen::VectorXd& theta, double phi,
                double alpha0, double beta0) {
  double q_event = 0.0, q_grid = 0.0, lam_total = 0.0, base_total = 0.0, n_events = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto x = ds.covariates(i);
    const std::size_t K = grid.node_count();
    std::vector<double> lam_g(K, 0.0), lam(K, 0.0), ones(K, 2.0);
    auto terms = [&](double t, double& lg, double& l) {
      const double go = model.forward(t, x, sp(theta_old));
      const double gn = model.forward(t, x, sp(theta));
      const double ag = std::abs(go);
      l = 2.0 * phi_old * logistic(ag) * std::exp(-(go + ag) / 2.0);
      lg = l * (-gn / 2.0 - gn * gn / 2.0 * tilted_mean(ag));
    };
    for (std::size_t k = 0; k < grid.cutoff(i); ++k) terms(grid.node(k), lam_g[k], lam[k]);
    double lg_end = 0.0, l_end = 0.0;
    terms(ds.time[i], lg_end, l_end);
    q_grid += grid.integrate(i, lam_g, lg_end);
    lam_total += grid.integrate(i, lam, l_end);
    base_total += grid.integrate(i, ones, 2.0);
    if (ds.event[i] == 1) {
      n_events += 1.0;
      const double c = std::abs(model.forward(ds.time[i], x, sp(theta_old)));
      const double gy = model.forward(ds.time[i], x, sp(theta));
      q_event += gy / 2.0 - gy * gy / 2.0 * tilted_mean(c);
    }
  }
  return q_event + q_grid + (alpha0 + n_events + lam_total - 1.0) * std::log(phi) -
         (beta0 + base_total) * phi - 0.5 * theta.squaredNorm();
}

}  // namespace

TEST_CASE("latent update closed forms") {
  const data::Dataset ds = synthetic(20, 1);
  const numkit::QuadratureGrid grid = numkit::build_grid(ds.time, 32);
  const net::MlpModel model = net::MlpModel::default_architecture(ds.covariate_count());
  const EmProblem prob(model, grid, ds, {});
  Eigen::VectorXd th = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.parameter_count()));

  const EmState s0 = em_latent_update(prob, th, 1.7);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(s0.c_breve[static_cast<Eigen::Index>(i)] == 0.0);
    CHECK(s0.omega_event[static_cast<Eigen::Index>(i)] == 0.25);
  }
  for (Eigen::Index q = 0; q < s0.lambda_breve.size(); ++q) CHECK(s0.lambda_breve[q] == doctest::Approx(1.7).epsilon(1e-14));

  th[th.size() - 1] = 5.0;
  const EmState s5 = em_latent_update(prob, th, 1.7);
  const double expected = 2.0 * 1.7 * logistic(5.0) * std::exp(-5.0);
  for (Eigen::Index q = 0; q < s5.lambda_breve.size(); ++q) {
    CHECK(s5.lambda_breve[q] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(s5.lambda_breve[q] == doctest::Approx(2.0 * 1.7 * (1.0 - logistic(5.0))).epsilon(1e-12));
  }
  for (std::size_t i = 0; i < ds.size(); ++i)
    CHECK(s5.c_breve[static_cast<Eigen::Index>(i)] == (ds.event[i] ? 5.0 : 0.0));

  const EmState sr = em_latent_update(prob, random_theta(model.parameter_count(), 2, 0.4), 0.8);
  for (Eigen::Index q = 0; q < sr.lambda_breve.size(); ++q) CHECK(sr.lambda_breve[q] >= 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (!ds.event[i]) CHECK(sr.c_breve[static_cast<Eigen::Index>(i)] == 0.0);
}

TEST_CASE("Q function matches a transcription oracle") {
  const data::Dataset ds = synthetic(15, 3);
  const numkit::QuadratureGrid grid = numkit::build_grid(ds.time, 24);
  const net::MlpModel model = net::MlpModel::default_architecture(ds.covariate_count());
  const model::BaselinePrior prior{2.0, 1.5, 1.0};
  const EmProblem prob(model, grid, ds, prior);
  const Eigen::VectorXd th_old = random_theta(model.parameter_count(), 4, 0.3);
  const Eigen::VectorXd th = random_theta(model.parameter_count(), 5, 0.3);
  const EmState st = em_latent_update(prob, th_old, 1.3);
  const double q = q_function(prob, st, th, 0.9);
  const double oracle = q_oracle(model, grid, ds, th_old, 1.3, th, 0.9, prior.alpha0, prior.beta0);
  CHECK(std::abs(q - oracle) <= 1e-10 * std::max(1.0, std::abs(oracle)));

  const PhiKernel k = phi_kernel(prob, st);
  CHECK(k.b == doctest::Approx(prior.beta0 + 2.0 * std::accumulate(ds.time.begin(), ds.time.end(), 0.0)).epsilon(1e-12));
}

TEST_CASE("Q gradient matches finite differences") {
  const data::Dataset ds = synthetic(12, 6);
  const numkit::QuadratureGrid grid = numkit::build_grid(ds.time, 20);
  const net::MlpModel model = net::MlpModel::default_architecture(ds.covariate_count());
  const EmProblem prob(model, grid, ds, {});
  const EmState st = em_latent_update(prob, random_theta(model.parameter_count(), 7, 0.3), 1.1);
  const Eigen::VectorXd th = random_theta(model.parameter_count(), 8, 0.3);
  const Eigen::VectorXd grad = q_gradient(prob, st, th);
  const double h = 1e-6;
  for (Eigen::Index j = 0; j < th.size(); j += 5) {
    Eigen::VectorXd tp = th, tm = th;
    tp[j] += h;
    tm[j] -= h;
    const double fd = (q_function(prob, st, tp, 1.1) - q_function(prob, st, tm, 1.1)) / (2.0 * h);
    CHECK(std::abs(fd - grad[j]) <= std::max(1e-5, 1e-4 * std::abs(grad[j])));
  }
}

TEST_CASE("prior-only M-step returns theta = 0") {
  data::Dataset ds = synthetic(10, 9);
  std::fill(ds.event.begin(), ds.event.end(), 0);
  const numkit::QuadratureGrid grid = numkit::build_grid(ds.time, 16);
  const net::MlpModel model = net::MlpModel::default_architecture(ds.covariate_count());
  const EmProblem prob(model, grid, ds, {});
  EmState st = em_latent_update(prob, random_theta(model.parameter_count(), 10, 1.0), 1.0);
  st.lambda_breve.setZero();
  const MStepResult r = em_m_step(prob, st);
  CHECK(r.theta.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("M-step: closed-form phi, fixed point and stationarity") {
  const data::Dataset ds = synthetic(25, 11);
  const numkit::QuadratureGrid grid = numkit::build_grid(ds.time, 64);
  const net::MlpModel model = net::MlpModel::default_architecture(ds.covariate_count());
  const EmProblem prob(model, grid, ds, {});
  const Eigen::VectorXd th0 = random_theta(model.parameter_count(), 12, 0.1);
  const EmState st = em_latent_update(prob, th0, 1.0);

  double lam_int = 0.0, base_int = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::vector<double> l(grid.node_count(), 0.0), b(grid.node_count(), 2.0);
    for (std::size_t k = 0; k < grid.cutoff(i); ++k)
      l[k] = 2.0 * logistic(-model.forward(grid.node(k), ds.covariates(i), sp(th0)));
    lam_int += grid.integrate(i, l, 2.0 * logistic(-model.forward(ds.time[i], ds.covariates(i), sp(th0))));
    base_int += grid.integrate(i, b, 2.0);
  }
  const double phi_closed = (1.0 + static_cast<double>(ds.event_count()) + lam_int - 1.0) / (1.0 + base_int);

  LbfgsOptions opt;
  opt.max_iterations = 1000;
  const MStepResult r = em_m_step(prob, st, opt);
  CHECK(std::abs(r.phi - phi_closed) < 1e-6);
  CHECK(q_function(prob, st, r.theta, r.phi) >= q_function(prob, st, th0, 1.0) - 1e-8);
  CHECK(q_gradient(prob, st, r.theta).norm() < 1e-4);

  EmState again = st;
  again.theta = r.theta;
  const MStepResult r2 = em_m_step(prob, again, opt);
  CHECK(r2.inner_iterations <= 1);
  CHECK(std::abs(q_function(prob, st, r2.theta, r2.phi) - q_function(prob, st, r.theta, r.phi)) < 1e-10);
}

TEST_CASE("EM on synthetic N = 25") {
  const data::Dataset ds = synthetic(25, 1001);
  const numkit::QuadratureGrid grid = numkit::build_grid(ds.time, 64);
  const net::MlpModel model = net::MlpModel::default_architecture(ds.covariate_count());
  const EmProblem prob(model, grid, ds, {});
  EmConfig cfg;
  cfg.seed = 3;
  const EmResult r = run_em(prob, cfg);
  CHECK(r.converged);
  CHECK(r.iterations <= 200);
  CHECK(r.phi_map > 0.0);
  REQUIRE(!r.trace.empty());
  for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k].log_posterior >= r.trace[k - 1].log_posterior - 1e-8);
  for (const auto& e : r.trace) CHECK(e.q_after >= e.q_before - 1e-8);

  const EmResult r2 = run_em(prob, cfg);
  CHECK(r2.phi_map == r.phi_map);
  CHECK(r2.iterations == r.iterations);
  bool same = r2.theta_map.size() == r.theta_map.size();
  for (Eigen::Index j = 0; same && j < r.theta_map.size(); ++j) same = r2.theta_map[j] == r.theta_map[j];
  CHECK(same);

  const std::string js = trace_json(r);
  CHECK(js.find("log_posterior") != std::string::npos);
}

TEST_CASE("EM from theta = 0 on other datasets ascends") {
  for (std::uint64_t seed : {21u, 22u}) {
    const data::Dataset ds = synthetic(40, seed);
    const numkit::QuadratureGrid grid = numkit::build_grid(ds.time, 32);
    const EmProblem prob(net::MlpModel::default_architecture(ds.covariate_count()), grid, ds, {2.0, 2.0, 1.0});
    EmConfig cfg;
    cfg.init_scale = 0.3;
    cfg.seed = seed;
    const EmResult r = run_em(prob, cfg);
    for (std::size_t k = 1; k < r.trace.size(); ++k)
      CHECK(r.trace[k].log_posterior >= r.trace[k - 1].log_posterior - 1e-8);
    CHECK(r.phi_map > 0.0);
  }
}

TEST_CASE("latent c is invariant under a joint permutation of covariates and first-layer weights") {
  const data::Dataset ds = synthetic(15, 13);
  const numkit::QuadratureGrid grid = numkit::build_grid(ds.time, 16);
  const net::MlpModel model = net::MlpModel::default_architecture(ds.covariate_count());
  const Eigen::VectorXd th = random_theta(model.parameter_count(), 14, 0.5);
  const std::vector<int> perm{2, 0, 3, 1};

  data::Dataset pd = ds;
  for (int j = 0; j < 4; ++j) pd.X.col(j) = ds.X.col(perm[static_cast<std::size_t>(j)]);
  net::MlpParameters p = model.unflatten(sp(th));
  Eigen::MatrixXd W0 = p.weights[0];
  for (int j = 0; j < 4; ++j) W0.col(1 + j) = p.weights[0].col(1 + perm[static_cast<std::size_t>(j)]);
  p.weights[0] = W0;
  const Eigen::VectorXd tp = model.flatten(p);

  const EmProblem a(model, grid, ds, {});
  const EmProblem b(model, grid, pd, {});
  const EmState sa = em_latent_update(a, th, 1.0);
  const EmState sb = em_latent_update(b, tp, 1.0);
  CHECK((sa.c_breve - sb.c_breve).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("EM input errors") {
  const data::Dataset ds = synthetic(10, 15);
  const numkit::QuadratureGrid grid = numkit::build_grid(ds.time, 16);
  CHECK_THROWS_AS(EmProblem(net::MlpModel::default_architecture(2), grid, ds, {}), InputError);
  const EmProblem prob(net::MlpModel::default_architecture(ds.covariate_count()), grid, ds, {});
  EmConfig bad;
  bad.max_iterations = 0;
  CHECK_THROWS_AS(run_em(prob, bad), InputError);
  bad = {};
  bad.init_scale = -1.0;
  CHECK_THROWS_AS(run_em(prob, bad), InputError);
}

TEST_CASE("L-BFGS on standard problems") {
  const Objective rosen = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(2);
    g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
    g[1] = 200.0 * (x[1] - x[0] * x[0]);
    return (1.0 - x[0]) * (1.0 - x[0]) + 100.0 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]);
  };
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  LbfgsOptions opt;
  opt.max_iterations = 500;
  const LbfgsResult r = lbfgs_minimize(rosen, x0, opt);
  CHECK(std::abs(r.x[0] - 1.0) < 1e-6);
  CHECK(std::abs(r.x[1] - 1.0) < 1e-6);

  Eigen::MatrixXd A = Eigen::MatrixXd::Random(30, 30);
  A = A * A.transpose() + Eigen::MatrixXd::Identity(30, 30);
  const Eigen::VectorXd b = Eigen::VectorXd::Random(30);
  const Objective quad = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = A * x - b;
    return 0.5 * x.dot(A * x) - b.dot(x);
  };
  const LbfgsResult rq = lbfgs_minimize(quad, Eigen::VectorXd::Zero(30), opt);
  const Eigen::VectorXd sol = A.ldlt().solve(b);
  CHECK((rq.x - sol).norm() < 1e-6 * sol.norm());
  CHECK(rq.value <= 0.0);
}
