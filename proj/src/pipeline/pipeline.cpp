// Licensed under the Apache License 2.0 (see LICENSE file).

#include "pipeline/pipeline.hpp"

#include <algorithm>

#include "common/errors.hpp"
#include "json.hpp"
#include "net/linearized.hpp"
#include "numkit/grid.hpp"
#include "numkit/rng.hpp"

namespace neuralsurv::pipeline {

FitOutput fit(const data::Dataset& raw_train, const RunConfig& cfg) {
  cfg.validate();
  raw_train.validate();
  if (raw_train.size() == 0) throw InputError("fit: empty training set");
  FitOutput out;
  auto& fm = out.model;
  fm.prior = cfg.prior();
  fm.scaling = data::FeatureScaling::fit(raw_train);
  fm.t_max = raw_train.max_time();
  fm.feature_names = raw_train.feature_names;
  const data::Dataset ds = data::normalize_time(fm.scaling.apply(raw_train), fm.t_max);

  std::vector<std::size_t> sizes{ds.covariate_count() + 1};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(1);
  fm.network = net::MlpModel(sizes, net::activation_from_string(cfg.activation));

  const auto grid = numkit::build_grid(ds.time, cfg.grid_size);
  const map_em::EmProblem em_prob(fm.network, grid, ds, fm.prior);
  out.em = map_em::run_em(em_prob, cfg.em());
  fm.theta_map = out.em.theta_map;
  fm.phi_map = out.em.phi_map;
  fm.em_iterations = out.em.iterations;
  fm.em_converged = out.em.converged;

  const auto lin = net::linearize(fm.network, fm.theta_map, grid, ds);
  const auto prob = cavi::make_problem(lin, fm.prior, grid, ds);
  out.cavi = cavi::run_cavi(prob, fm.theta_map, fm.phi_map, cfg.cavi());
  if (!out.cavi.error.empty()) throw NumericalError(out.cavi.error);
  const auto& st = out.cavi.state;
  fm.posterior = {st.alpha, st.beta, st.mu, st.sigma, fm.theta_map};
  fm.cavi_iterations = out.cavi.iterations;
  fm.cavi_converged = out.cavi.converged;
  fm.config_text = cfg.to_text();
  fm.config_hash = cfg.hash();
  return out;
}

namespace {

Eigen::MatrixXd standardize(const FittedModel& fm, const Eigen::MatrixXd& raw_X) {
  if (static_cast<std::size_t>(raw_X.cols()) != fm.network.covariate_dim())
    throw InputError("predict: expected " + std::to_string(fm.network.covariate_dim()) + " covariates");
  Eigen::MatrixXd X(raw_X.rows(), raw_X.cols());
  for (Eigen::Index i = 0; i < raw_X.rows(); ++i) {
    const Eigen::VectorXd row = raw_X.row(i).transpose();
    X.row(i) = fm.scaling.apply({row.data(), static_cast<std::size_t>(row.size())}).transpose();
  }
  return X;
}

}  // namespace

predict::PosteriorSurvival predict_survival(const FittedModel& fm, const Eigen::MatrixXd& raw_X,
                                            const std::vector<double>& times, std::size_t draws, double level,
                                            std::uint64_t seed) {
  std::vector<double> scaled(times.size());
  std::transform(times.begin(), times.end(), scaled.begin(), [&](double t) { return t / fm.t_max; });
  numkit::RngStream rng = numkit::RngStream(seed).derive(0x7072);
  auto ps = predict::sample_survival(fm.posterior, fm.network, fm.prior, 1.0, standardize(fm, raw_X), scaled, draws,
                                     rng, level);
  ps.times = times;
  return ps;
}

eval::SurvivalMatrix mean_survival(const FittedModel& fm, const Eigen::MatrixXd& raw_X, const std::vector<double>& times,
                                   std::size_t draws, std::uint64_t seed) {
  std::vector<double> scaled(times.size());
  std::transform(times.begin(), times.end(), scaled.begin(), [&](double t) { return t / fm.t_max; });
  numkit::RngStream rng = numkit::RngStream(seed).derive(0x7072);
  const auto d = predict::draw_posterior(fm.posterior, draws, rng);
  const auto ps = predict::survival_curves(fm.network, fm.prior, 1.0, d, fm.theta_map, standardize(fm, raw_X), scaled);
  eval::SurvivalMatrix est{times, Eigen::MatrixXd(raw_X.rows(), static_cast<Eigen::Index>(times.size()))};
  for (std::size_t i = 0; i < ps.subject_count(); ++i)
    est.values.row(static_cast<Eigen::Index>(i)) = ps.draws[i].colwise().mean();
  return est;
}

Metrics evaluate_estimates(const eval::SurvivalMatrix& est, const data::Dataset& test, double horizon,
                           std::size_t grid_nodes) {
  Metrics m;
  m.n = test.size();
  m.n_events = test.event_count();
  m.grid = eval::uniform_grid(horizon, grid_nodes);
  try {
    m.c_index = eval::c_index(est, test);
  } catch (const InputError& e) {
    m.c_index_reason = e.what();
  }
  m.ipcw_ibs = eval::ipcw_ibs(est, test, m.grid, eval::km_censor(test));
  return m;
}

Metrics evaluate(const FittedModel& fm, const data::Dataset& raw_test, const RunConfig& cfg, bool constant_half) {
  raw_test.validate();
  const double horizon = std::min(fm.t_max, raw_test.max_time());
  const auto grid = eval::uniform_grid(horizon, cfg.eval_grid);
  std::vector<double> axis = grid;
  axis.insert(axis.end(), raw_test.time.begin(), raw_test.time.end());
  std::sort(axis.begin(), axis.end());
  axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
  eval::SurvivalMatrix est;
  if (constant_half) {
    est = {axis, Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(raw_test.size()),
                                           static_cast<Eigen::Index>(axis.size()), 0.5)};
  } else {
    est = mean_survival(fm, raw_test.X, axis, cfg.draws, cfg.seed);
  }
  return evaluate_estimates(est, raw_test, horizon, cfg.eval_grid);
}

std::string Metrics::to_json() const {
  nlohmann::json j;
  if (c_index)
    j["c_index"] = *c_index;
  else
    j["c_index"] = nullptr, j["c_index_reason"] = c_index_reason;
  j["ipcw_ibs"] = ipcw_ibs;
  j["n"] = n;
  j["n_events"] = n_events;
  j["grid"] = {{"start", grid.front()}, {"end", grid.back()}, {"count", grid.size()}};
  return j.dump(2);
}

}  // namespace neuralsurv::pipeline
