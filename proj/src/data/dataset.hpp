// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "numkit/rng.hpp"

namespace neuralsurv::data {

// Right-censored survival data. time holds y_i = min(T_i, C_i) > 0 and event
// holds delta_i = 1{T_i <= C_i}. time_scale is the constant times were divided
// by (1 when the data are still in original units).
struct Dataset {
  Eigen::MatrixXd X;  // N x p
  std::vector<double> time;
  std::vector<int> event;
  std::vector<std::string> feature_names;
  double time_scale = 1.0;

  std::size_t size() const { return time.size(); }
  std::size_t covariate_count() const { return static_cast<std::size_t>(X.cols()); }
  std::size_t event_count() const;
  double max_time() const;
  std::vector<double> covariates(std::size_t i) const;

  // Throws InputError unless shapes agree, times are finite and > 0, and flags are 0/1.
  void validate() const;

  Dataset subset(const std::vector<std::size_t>& rows) const;
};

// Per-feature affine standardization fitted on training data.
struct FeatureScaling {
  std::vector<double> mean;
  std::vector<double> scale;

  static FeatureScaling fit(const Dataset& ds);
  Dataset apply(const Dataset& ds) const;
  Eigen::VectorXd apply(std::span<const double> x) const;
};

// Divides all times by t_max (the largest training time in original units).
Dataset normalize_time(const Dataset& ds, double t_max);
double denormalize_time(double t, double t_max);

// Two-group synthetic benchmark: group ~ fair coin, T ~ logNormal(3, 0.8^2)
// for group 0 and logNormal(3.5, 1) for group 1, three N(0,1) noise
// covariates, censoring C ~ Exponential(rate 0.025). Covariates are
// (group, noise1, noise2, noise3) in original units.
Dataset gen_synthetic(std::size_t n, numkit::RngStream& rng);

struct SyntheticDesign {
  static constexpr double kMu0 = 3.0, kSigma0 = 0.8;
  static constexpr double kMu1 = 3.5, kSigma1 = 1.0;
  static constexpr double kCensorRate = 0.025;
  static constexpr std::size_t kNoiseCovariates = 3;
};

// True survival P(T > t | group) of the synthetic generator.
double synthetic_true_survival(double t, int group);

using FoldSplit = std::pair<std::vector<std::size_t>, std::vector<std::size_t>>;  // (train, test)

// Random partition into k folds whose sizes differ by at most one.
std::vector<FoldSplit> kfold(std::size_t n, std::size_t k, numkit::RngStream& rng);

}  // namespace neuralsurv::data
