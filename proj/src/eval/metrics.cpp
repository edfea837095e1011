// Licensed under the Apache License 2.0 (see LICENSE file).

#include "eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/errors.hpp"

namespace neuralsurv::eval {

void SurvivalMatrix::validate() const {
  if (times.empty() || static_cast<std::size_t>(values.cols()) != times.size())
    throw InputError("survival matrix: time axis does not match columns");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1])) throw InputError("survival matrix: times must be strictly increasing");
}

double SurvivalMatrix::at(std::size_t subject, double t) const {
  const auto row = static_cast<Eigen::Index>(subject);
  if (t <= times.front()) return values(row, 0);
  if (t >= times.back()) return values(row, values.cols() - 1);
  const auto k = static_cast<Eigen::Index>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
  const double t0 = times[static_cast<std::size_t>(k - 1)], t1 = times[static_cast<std::size_t>(k)];
  const double u = (t - t0) / (t1 - t0);
  return (1.0 - u) * values(row, k - 1) + u * values(row, k);
}

KmCensorCurve::KmCensorCurve(const data::Dataset& ds) {
  if (ds.size() == 0) throw InputError("km: empty dataset");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ds.time[a] < ds.time[b]; });
  double surv = 1.0;
  std::size_t at_risk = ds.size();
  for (std::size_t k = 0; k < order.size();) {
    const double t = ds.time[order[k]];
    std::size_t censored = 0, total = 0;
    while (k < order.size() && ds.time[order[k]] == t) {
      censored += ds.event[order[k]] == 0;
      ++total;
      ++k;
    }
    if (censored > 0) {
      surv *= 1.0 - static_cast<double>(censored) / static_cast<double>(at_risk);
      times_.push_back(t);
      values_.push_back(surv);
    }
    at_risk -= total;
  }
}

double KmCensorCurve::value(double t) const {
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  return it == times_.begin() ? 1.0 : values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double KmCensorCurve::left_limit(double t) const {
  const auto it = std::lower_bound(times_.begin(), times_.end(), t);
  return it == times_.begin() ? 1.0 : values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

KmCensorCurve km_censor(const data::Dataset& ds) { return KmCensorCurve(ds); }

namespace {

void check_shapes(const SurvivalMatrix& est, const data::Dataset& ds) {
  est.validate();
  if (est.subject_count() != ds.size()) throw InputError("metrics: estimate rows do not match subjects");
}

}  // namespace

double c_index(const SurvivalMatrix& est, const data::Dataset& ds) {
  check_shapes(est, ds);
  double concordant = 0.0;
  std::size_t comparable = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.event[i] != 1) continue;
    const double yi = ds.time[i];
    const double si = est.at(i, yi);
    for (std::size_t j = 0; j < ds.size(); ++j) {
      if (!(ds.time[j] > yi)) continue;
      ++comparable;
      const double sj = est.at(j, yi);
      if (si < sj)
        concordant += 1.0;
      else if (si == sj)
        concordant += 0.5;
    }
  }
  if (comparable == 0) throw InputError("c-index: no comparable pairs");
  return concordant / static_cast<double>(comparable);
}

double ipcw_brier(const SurvivalMatrix& est, const data::Dataset& ds, double t, const KmCensorCurve& censor) {
  check_shapes(est, ds);
  double total = 0.0;
  const double c_t = censor.value(t);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double s = est.at(i, t);
    if (ds.time[i] <= t && ds.event[i] == 1) {
      const double c = censor.left_limit(ds.time[i]);
      if (!(c > 0.0)) throw NumericalError("brier: zero censoring survival before an event time");
      total += s * s / c;
    } else if (ds.time[i] > t) {
      if (!(c_t > 0.0)) throw NumericalError("brier: zero censoring survival at the evaluation time");
      total += (1.0 - s) * (1.0 - s) / c_t;
    }
  }
  return total / static_cast<double>(ds.size());
}

double ipcw_ibs(const SurvivalMatrix& est, const data::Dataset& ds, const std::vector<double>& grid,
                const KmCensorCurve& censor) {
  std::vector<double> ts, bs;
  for (double t : grid) {
    try {
      const double b = ipcw_brier(est, ds, t, censor);
      ts.push_back(t);
      bs.push_back(b);
    } catch (const NumericalError&) {
    }
  }
  if (ts.size() < 2) throw NumericalError("ibs: fewer than two evaluable grid nodes");
  double area = 0.0;
  for (std::size_t k = 1; k < ts.size(); ++k) area += 0.5 * (ts[k] - ts[k - 1]) * (bs[k] + bs[k - 1]);
  const double span = ts.back() - ts.front();
  if (!(span > 0.0)) throw InputError("ibs: grid span must be positive");
  return area / span;
}

std::vector<double> uniform_grid(double horizon, std::size_t count) {
  if (count < 2 || !(horizon > 0.0)) throw InputError("uniform grid: need count >= 2 and horizon > 0");
  std::vector<double> g(count);
  for (std::size_t k = 0; k < count; ++k) g[k] = horizon * static_cast<double>(k) / static_cast<double>(count - 1);
  return g;
}

}  // namespace neuralsurv::eval
