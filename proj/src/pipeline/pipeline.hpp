// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "cavi/cavi.hpp"
#include "data/dataset.hpp"
#include "eval/metrics.hpp"
#include "map_em/em.hpp"
#include "net/mlp.hpp"
#include "pipeline/config.hpp"
#include "predict/predict.hpp"

namespace neuralsurv::pipeline {

// Everything a prediction needs: architecture, preprocessing statistics,
// MAP estimate and the variational posterior.
struct FittedModel {
  net::MlpModel network = net::MlpModel({2, 1});
  model::BaselinePrior prior;
  data::FeatureScaling scaling;
  double t_max = 1.0;
  std::vector<std::string> feature_names;
  Eigen::VectorXd theta_map;
  double phi_map = 1.0;
  predict::PosteriorParameters posterior;
  int em_iterations = 0;
  bool em_converged = false;
  int cavi_iterations = 0;
  bool cavi_converged = false;
  std::string config_text;
  std::string config_hash;
};

struct FitOutput {
  FittedModel model;
  map_em::EmResult em;
  cavi::CaviResult cavi;
};

// Standardizes covariates, normalizes time by the largest training time,
// runs EM for the MAP estimate and CAVI around it. A CAVI failure is raised as
// NumericalError.
FitOutput fit(const data::Dataset& raw_train, const RunConfig& cfg);

// Posterior survival for raw (unstandardized) covariate rows at times in
// original units.
predict::PosteriorSurvival predict_survival(const FittedModel& fm, const Eigen::MatrixXd& raw_X,
                                            const std::vector<double>& times, std::size_t draws, double level,
                                            std::uint64_t seed);

struct Metrics {
  std::optional<double> c_index;
  std::string c_index_reason;
  double ipcw_ibs = 0.0;
  std::size_t n = 0;
  std::size_t n_events = 0;
  std::vector<double> grid;

  std::string to_json() const;
};

// Metrics of the posterior-mean survival curve (or of the constant 1/2
// predictor when constant_half is set) on a test set in original units. The
// censoring curve is fitted on the test set; the Brier grid spans
// [0, min(train t_max, max test time)].
Metrics evaluate(const FittedModel& fm, const data::Dataset& raw_test, const RunConfig& cfg, bool constant_half = false);

Metrics evaluate_estimates(const eval::SurvivalMatrix& est, const data::Dataset& test, double horizon,
                           std::size_t grid_nodes);

// Posterior-mean survival of raw covariate rows on the evaluation axis.
eval::SurvivalMatrix mean_survival(const FittedModel& fm, const Eigen::MatrixXd& raw_X, const std::vector<double>& times,
                                   std::size_t draws, std::uint64_t seed);

}  // namespace neuralsurv::pipeline
