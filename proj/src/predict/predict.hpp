// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include "cavi/covariance.hpp"
#include "model/hazard.hpp"
#include "net/mlp.hpp"
#include "numkit/rng.hpp"

namespace neuralsurv::predict {

// Variational posterior q(phi) = Gamma(alpha, beta), q(theta) = N(mu, Sigma)
// together with the expansion point of the linearized network.
struct PosteriorParameters {
  double alpha = 1.0;
  double beta = 1.0;
  Eigen::VectorXd mu;
  cavi::Covariance sigma;
  Eigen::VectorXd theta_star;
};

struct PosteriorDraws {
  Eigen::VectorXd phi;    // S
  Eigen::MatrixXd theta;  // m x S
};

PosteriorDraws draw_posterior(const PosteriorParameters& post, std::size_t S, numkit::RngStream& rng);

struct SurvivalSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd median;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct PosteriorSurvival {
  std::vector<double> times;           // T
  std::vector<Eigen::MatrixXd> draws;  // one S x T matrix per subject
  double level = 0.9;
  std::vector<SurvivalSummary> summary;

  std::size_t subject_count() const { return draws.size(); }
};

// Survival curves of the linearized model for every row of X at the given
// non-decreasing times (>= 0), one curve per posterior draw. The same draws
// are shared by all subjects.
PosteriorSurvival survival_curves(const net::MlpModel& model, const model::BaselinePrior& prior, double horizon,
                                  const PosteriorDraws& draws, const Eigen::VectorXd& theta_star,
                                  const Eigen::MatrixXd& X, const std::vector<double>& times, double level = 0.9);

PosteriorSurvival sample_survival(const PosteriorParameters& post, const net::MlpModel& model,
                                  const model::BaselinePrior& prior, double horizon, const Eigen::MatrixXd& X,
                                  const std::vector<double>& times, std::size_t S, numkit::RngStream& rng,
                                  double level = 0.9);

struct Band {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

// Pointwise equal-tailed quantiles at (1-level)/2 and (1+level)/2 of an S x T
// sample matrix; needs S >= 20 and level in (0, 1).
Band credible_band(const Eigen::MatrixXd& samples, double level);

// Linearly interpolated empirical quantile (the usual "type 7" definition).
double quantile(std::vector<double> values, double prob);

SurvivalSummary summarize(const Eigen::MatrixXd& samples, double level);

}  // namespace neuralsurv::predict
