// Licensed under the Apache License 2.0 (see LICENSE file).

#include "data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/errors.hpp"

namespace neuralsurv::data {

std::size_t Dataset::event_count() const {
  return static_cast<std::size_t>(std::count(event.begin(), event.end(), 1));
}

double Dataset::max_time() const {
  if (time.empty()) throw InputError("dataset is empty");
  return *std::max_element(time.begin(), time.end());
}

std::vector<double> Dataset::covariates(std::size_t i) const {
  std::vector<double> x(covariate_count());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return x;
}

void Dataset::validate() const {
  if (time.empty()) throw InputError("dataset is empty");
  if (event.size() != time.size() || static_cast<std::size_t>(X.rows()) != time.size())
    throw InputError("dataset columns have inconsistent lengths");
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (!std::isfinite(time[i]) || !(time[i] > 0.0))
      throw InputError("observation " + std::to_string(i) + ": time must be finite and > 0");
    if (event[i] != 0 && event[i] != 1)
      throw InputError("observation " + std::to_string(i) + ": event flag must be 0 or 1");
  }
  if (!X.allFinite()) throw InputError("covariates contain non-finite values");
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.feature_names = feature_names;
  out.time_scale = time_scale;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.X.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(rows[r]));
    out.time.push_back(time.at(rows[r]));
    out.event.push_back(event.at(rows[r]));
  }
  return out;
}

FeatureScaling FeatureScaling::fit(const Dataset& ds) {
  FeatureScaling s;
  const auto n = static_cast<double>(ds.size());
  for (Eigen::Index j = 0; j < ds.X.cols(); ++j) {
    const double mu = ds.X.col(j).mean();
    const double var = (ds.X.col(j).array() - mu).square().sum() / n;
    s.mean.push_back(mu);
    // Constant columns are only centred.
    s.scale.push_back(var > 0.0 ? std::sqrt(var) : 1.0);
  }
  return s;
}

Dataset FeatureScaling::apply(const Dataset& ds) const {
  if (mean.size() != ds.covariate_count()) throw InputError("feature scaling does not match covariate count");
  Dataset out = ds;
  for (Eigen::Index j = 0; j < out.X.cols(); ++j)
    out.X.col(j) = (out.X.col(j).array() - mean[static_cast<std::size_t>(j)]) / scale[static_cast<std::size_t>(j)];
  return out;
}

Eigen::VectorXd FeatureScaling::apply(std::span<const double> x) const {
  if (x.size() != mean.size()) throw InputError("feature scaling does not match covariate count");
  Eigen::VectorXd out(static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) out[static_cast<Eigen::Index>(j)] = (x[j] - mean[j]) / scale[j];
  return out;
}

Dataset normalize_time(const Dataset& ds, double t_max) {
  if (!(t_max > 0.0)) throw InputError("time normalization constant must be > 0");
  Dataset out = ds;
  for (auto& t : out.time) t /= t_max;
  out.time_scale = ds.time_scale * t_max;
  return out;
}

double denormalize_time(double t, double t_max) { return t * t_max; }

Dataset gen_synthetic(std::size_t n, numkit::RngStream& rng) {
  if (n == 0) throw InputError("gen_synthetic: n must be >= 1");
  using D = SyntheticDesign;
  Dataset ds;
  ds.feature_names = {"group", "noise1", "noise2", "noise3"};
  ds.X.resize(static_cast<Eigen::Index>(n), 1 + static_cast<Eigen::Index>(D::kNoiseCovariates));
  ds.time.resize(n);
  ds.event.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const int group = rng.bernoulli(0.5) ? 1 : 0;
    const double T = group == 0 ? rng.lognormal(D::kMu0, D::kSigma0) : rng.lognormal(D::kMu1, D::kSigma1);
    const double C = rng.exponential(D::kCensorRate);
    ds.X(row, 0) = group;
    for (std::size_t j = 0; j < D::kNoiseCovariates; ++j) ds.X(row, static_cast<Eigen::Index>(j + 1)) = rng.normal();
    ds.time[i] = std::min(T, C);
    ds.event[i] = T <= C ? 1 : 0;
  }
  return ds;
}

double synthetic_true_survival(double t, int group) {
  using D = SyntheticDesign;
  if (t <= 0.0) return 1.0;
  const double mu = group == 0 ? D::kMu0 : D::kMu1;
  const double sigma = group == 0 ? D::kSigma0 : D::kSigma1;
  return 0.5 * std::erfc((std::log(t) - mu) / (sigma * std::sqrt(2.0)));
}

std::vector<FoldSplit> kfold(std::size_t n, std::size_t k, numkit::RngStream& rng) {
  if (k < 2) throw InputError("kfold: k must be >= 2");
  if (n < k) throw InputError("kfold: need at least k observations");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::vector<FoldSplit> folds;
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = n / k + (f < n % k ? 1 : 0);
    std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(start),
                                  order.begin() + static_cast<std::ptrdiff_t>(start + len));
    std::vector<std::size_t> train;
    train.reserve(n - len);
    train.insert(train.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(start));
    train.insert(train.end(), order.begin() + static_cast<std::ptrdiff_t>(start + len), order.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    folds.emplace_back(std::move(train), std::move(test));
    start += len;
  }
  return folds;
}

}  // namespace neuralsurv::data
