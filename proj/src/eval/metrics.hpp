// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include "data/dataset.hpp"

namespace neuralsurv::eval {

// Per-subject survival estimates on a shared increasing time axis. Values
// between nodes are linearly interpolated; outside the axis the nearest end
// value is held.
struct SurvivalMatrix {
  std::vector<double> times;  // T
  Eigen::MatrixXd values;     // N x T

  std::size_t subject_count() const { return static_cast<std::size_t>(values.rows()); }
  double at(std::size_t subject, double t) const;
  void validate() const;
};

// Product-limit estimate of the censoring survival function, treating
// censorings (delta = 0) as the events.
class KmCensorCurve {
 public:
  KmCensorCurve() = default;
  explicit KmCensorCurve(const data::Dataset& ds);

  // Right-continuous value C(t).
  double value(double t) const;
  // Left limit C(t-).
  double left_limit(double t) const;
  const std::vector<double>& jump_times() const { return times_; }
  const std::vector<double>& jump_values() const { return values_; }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
};

KmCensorCurve km_censor(const data::Dataset& ds);

// Antolini time-dependent concordance. Throws InputError when no comparable
// pair exists.
double c_index(const SurvivalMatrix& est, const data::Dataset& ds);

// IPCW Brier score at time t. Throws NumericalError when a weight needed at t
// would divide by a zero censoring survival.
double ipcw_brier(const SurvivalMatrix& est, const data::Dataset& ds, double t, const KmCensorCurve& censor);

// Trapezoid integral of the Brier score over the grid divided by the span of
// the nodes used; nodes where the score is undefined are skipped.
double ipcw_ibs(const SurvivalMatrix& est, const data::Dataset& ds, const std::vector<double>& grid,
                const KmCensorCurve& censor);

// `count` uniform nodes on [0, horizon].
std::vector<double> uniform_grid(double horizon, std::size_t count = 100);

}  // namespace neuralsurv::eval
