// Licensed under the Apache License 2.0 (see LICENSE file).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "common/errors.hpp"
#include "data/dataset.hpp"
#include "doctest.h"
#include "eval/metrics.hpp"
#include "numkit/rng.hpp"

using namespace neuralsurv;
using namespace neuralsurv::eval;

namespace {

data::Dataset make_data(const std::vector<double>& y, const std::vector<int>& d) {
  data::Dataset ds;
  ds.time = y;
  ds.event = d;
  ds.X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(y.size()), 1);
  ds.feature_names = {"x"};
  return ds;
}

// Random instance whose estimate axis contains every observed time and every grid node.
struct Instance {
  data::Dataset ds;
  SurvivalMatrix est;
  std::vector<double> grid;
};

Instance random_instance(std::size_t n, numkit::RngStream& rng, double censor_p = 0.3) {
  Instance in;
  std::vector<double> y(n);
  std::vector<int> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = 0.05 + rng.uniform() * 2.0;
    d[i] = rng.uniform() < censor_p ? 0 : 1;
  }
  in.ds = make_data(y, d);
  for (int k = 0; k < 25; ++k) in.grid.push_back(1.6 * k / 24.0);
  std::vector<double> axis = y;
  axis.insert(axis.end(), in.grid.begin(), in.grid.end());
  std::sort(axis.begin(), axis.end());
  axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
  in.est.times = axis;
  in.est.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(axis.size()));
  for (std::size_t i = 0; i < n; ++i) {
    const double rate = 0.2 + rng.uniform();
    for (std::size_t k = 0; k < axis.size(); ++k)
      in.est.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = std::exp(-rate * axis[k]);
  }
  // A few exact ties in estimates.
  in.est.values.row(1) = in.est.values.row(0);
  return in;
}

double lookup(const SurvivalMatrix& est, std::size_t i, double t) {
  const auto it = std::find(est.times.begin(), est.times.end(), t);
  REQUIRE(it != est.times.end());
  return est.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(it - est.times.begin()));
}

double brute_c_index(const SurvivalMatrix& est, const data::Dataset& ds) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < ds.size(); ++j) {
      if (!(ds.event[i] == 1 && ds.time[i] < ds.time[j])) continue;
      den += 1.0;
      const double si = lookup(est, i, ds.time[i]), sj = lookup(est, j, ds.time[i]);
      num += si < sj ? 1.0 : (si == sj ? 0.5 : 0.0);
    }
  return num / den;
}

// Product-limit censoring survival from its definition; `strict` gives the left limit.
double brute_km(const data::Dataset& ds, double t, bool strict) {
  double c = 1.0;
  for (std::size_t j = 0; j < ds.size(); ++j) {
    if (ds.event[j] != 0) continue;
    if (strict ? !(ds.time[j] < t) : !(ds.time[j] <= t)) continue;
    double at_risk = 0.0, censored_here = 0.0;
    for (std::size_t k = 0; k < ds.size(); ++k) {
      at_risk += ds.time[k] >= ds.time[j] ? 1.0 : 0.0;
      censored_here += (ds.time[k] == ds.time[j] && ds.event[k] == 0) ? 1.0 : 0.0;
    }
    // Each tied censoring contributes once to the product.
    c *= std::pow(1.0 - censored_here / at_risk, 1.0 / censored_here);
  }
  return c;
}

double brute_brier(const SurvivalMatrix& est, const data::Dataset& ds, double t) {
  double s = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double p = lookup(est, i, t);
    if (ds.time[i] <= t && ds.event[i] == 1) s += p * p / brute_km(ds, ds.time[i], true);
    if (ds.time[i] > t) s += (1.0 - p) * (1.0 - p) / brute_km(ds, t, false);
  }
  return s / static_cast<double>(ds.size());
}

SurvivalMatrix constant(std::size_t n, const std::vector<double>& axis, double v) {
  SurvivalMatrix m;
  m.times = axis;
  m.values = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(axis.size()), v);
  return m;
}

}  // namespace

TEST_CASE("c-index toy cases") {
  const data::Dataset ds = make_data({1.0, 2.0, 3.0, 4.0}, {1, 1, 1, 1});
  SurvivalMatrix est;
  est.times = {0.0, 1.0, 2.0, 3.0, 4.0};
  est.values.resize(4, 5);
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 5; ++k) est.values(i, k) = std::exp(-(4.0 - i) * 0.3 * k);
  CHECK(c_index(est, ds) == 1.0);
  CHECK(c_index(constant(4, est.times, 0.7), ds) == 0.5);

  const data::Dataset none = make_data({1.0, 2.0}, {0, 0});
  CHECK_THROWS_AS(c_index(constant(2, {0.0, 3.0}, 0.5), none), InputError);
}

TEST_CASE("c-index and Brier match brute force on random instances") {
  numkit::RngStream rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    const Instance in = random_instance(20, rng);
    if (in.ds.event_count() == 0) continue;
    CHECK(c_index(in.est, in.ds) == brute_c_index(in.est, in.ds));
    const KmCensorCurve km(in.ds);
    for (double t : in.ds.time) {
      double expected = 0.0;
      bool ok = true;
      try {
        expected = brute_brier(in.est, in.ds, t);
        ok = std::isfinite(expected);
      } catch (...) {
        ok = false;
      }
      if (!ok) continue;
      CHECK(std::abs(ipcw_brier(in.est, in.ds, t, km) - expected) < 1e-12);
    }
  }
}

TEST_CASE("Kaplan-Meier censoring curve") {
  const data::Dataset all_events = make_data({1.0, 2.0, 3.0}, {1, 1, 1});
  const KmCensorCurve k0(all_events);
  for (double t : {0.0, 1.5, 3.0, 10.0}) CHECK(k0.value(t) == 1.0);

  const data::Dataset one = make_data({2.0}, {0});
  const KmCensorCurve k1(one);
  CHECK(k1.value(1.999) == 1.0);
  CHECK(k1.value(2.0) == 0.0);
  CHECK(k1.left_limit(2.0) == 1.0);
  CHECK(k1.value(5.0) == 0.0);

  const data::Dataset ten = make_data({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, {1, 0, 1, 1, 0, 1, 0, 1, 1, 0});
  const KmCensorCurve k(ten);
  const double table[][2] = {{0.5, 1.0},          {1.0, 1.0},         {2.0, 8.0 / 9.0}, {4.9, 8.0 / 9.0},
                             {5.0, 20.0 / 27.0},  {6.5, 20.0 / 27.0}, {7.0, 5.0 / 9.0}, {9.99, 5.0 / 9.0},
                             {10.0, 0.0}};
  for (const auto& row : table) CHECK(k.value(row[0]) == doctest::Approx(row[1]).epsilon(1e-14));
  CHECK(k.left_limit(5.0) == doctest::Approx(8.0 / 9.0));
  CHECK(k.jump_times().size() == 4);

  // Tied censorings and events.
  const data::Dataset tied = make_data({1, 2, 2, 2, 3, 4}, {0, 0, 0, 1, 1, 0});
  const KmCensorCurve kt(tied);
  CHECK(kt.value(1.0) == doctest::Approx(5.0 / 6.0));
  CHECK(kt.value(2.0) == doctest::Approx(5.0 / 6.0 * (1.0 - 2.0 / 5.0)));
  CHECK(kt.value(2.0) == doctest::Approx(brute_km(tied, 2.0, false)));
  CHECK(kt.value(4.0) == 0.0);

  numkit::RngStream rng(2);
  double prev = 1.0;
  const Instance in = random_instance(30, rng);
  const KmCensorCurve kr(in.ds);
  for (double t = 0.0; t < 2.2; t += 0.01) {
    CHECK(kr.value(t) <= prev);
    prev = kr.value(t);
    CHECK(kr.value(t) == doctest::Approx(brute_km(in.ds, t, false)).epsilon(1e-13));
  }
}

TEST_CASE("Brier and IBS closed forms") {
  const data::Dataset ds = make_data({0.5, 1.0, 1.5, 2.0, 2.5}, {1, 1, 1, 1, 1});
  const KmCensorCurve km(ds);
  const std::vector<double> axis{0.0, 3.0};
  const SurvivalMatrix half = constant(5, axis, 0.5);
  for (double t : {0.0, 0.7, 1.0, 2.49}) CHECK(ipcw_brier(half, ds, t, km) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(ipcw_ibs(half, ds, uniform_grid(2.5, 100), km) == doctest::Approx(0.25).epsilon(1e-14));

  // Step-like oracle predictor: 1 up to just before y_i, 0 from y_i on.
  SurvivalMatrix oracle;
  std::vector<double> ax{0.0};
  const double eps = 1e-4;
  for (double y : ds.time) {
    ax.push_back(y - eps);
    ax.push_back(y);
  }
  ax.push_back(3.0);
  oracle.times = ax;
  oracle.values.resize(5, static_cast<Eigen::Index>(ax.size()));
  for (int i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < ax.size(); ++k)
      oracle.values(i, static_cast<Eigen::Index>(k)) = ax[k] < ds.time[static_cast<std::size_t>(i)] - eps / 2 ? 1.0 : 0.0;
  for (double t : {0.3, 0.75, 1.2, 2.2}) CHECK(ipcw_brier(oracle, ds, t, km) == 0.0);
  CHECK(ipcw_ibs(oracle, ds, uniform_grid(2.5, 20001), km) < 0.01);
}

TEST_CASE("IBS matches a fine-grid brute force") {
  numkit::RngStream rng(3);
  Instance in = random_instance(15, rng, 0.25);
  std::vector<double> fine;
  for (int k = 0; k <= 2000; ++k) fine.push_back(1.5 * k / 2000.0);
  std::vector<double> axis = in.est.times;
  axis.insert(axis.end(), fine.begin(), fine.end());
  std::sort(axis.begin(), axis.end());
  axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
  SurvivalMatrix est;
  est.times = axis;
  est.values.resize(15, static_cast<Eigen::Index>(axis.size()));
  for (Eigen::Index i = 0; i < 15; ++i)
    for (std::size_t k = 0; k < axis.size(); ++k) est.values(i, static_cast<Eigen::Index>(k)) = in.est.at(static_cast<std::size_t>(i), axis[k]);
  const KmCensorCurve km(in.ds);
  std::vector<double> ts, bs;
  for (double t : fine) {
    const double b = brute_brier(est, in.ds, t);
    if (!std::isfinite(b)) continue;
    ts.push_back(t);
    bs.push_back(b);
  }
  double area = 0.0;
  for (std::size_t k = 1; k < ts.size(); ++k) area += 0.5 * (ts[k] - ts[k - 1]) * (bs[k] + bs[k - 1]);
  const double expected = area / (ts.back() - ts.front());
  CHECK(std::abs(ipcw_ibs(est, in.ds, fine, km) - expected) < 1e-6);
}

TEST_CASE("metric invariances") {
  numkit::RngStream rng(4);
  const Instance in = random_instance(20, rng);
  SurvivalMatrix cubed = in.est;
  cubed.values = in.est.values.array().cube().matrix();
  CHECK(c_index(cubed, in.ds) == c_index(in.est, in.ds));

  std::vector<std::size_t> perm(20);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[3], perm[11]);
  const data::Dataset pd = in.ds.subset(perm);
  SurvivalMatrix pe = in.est;
  for (std::size_t i = 0; i < 20; ++i) pe.values.row(static_cast<Eigen::Index>(i)) = in.est.values.row(static_cast<Eigen::Index>(perm[i]));
  CHECK(c_index(pe, pd) == c_index(in.est, in.ds));
  const KmCensorCurve a(in.ds), b(pd);
  CHECK(ipcw_ibs(pe, pd, in.grid, b) == doctest::Approx(ipcw_ibs(in.est, in.ds, in.grid, a)).epsilon(1e-14));

  // Constant 1/2 under zero censoring on an arbitrary dataset.
  data::Dataset nocens = in.ds;
  std::fill(nocens.event.begin(), nocens.event.end(), 1);
  const double ymax = *std::max_element(nocens.time.begin(), nocens.time.end());
  CHECK(ipcw_ibs(constant(20, {0.0, ymax}, 0.5), nocens, uniform_grid(ymax, 50), KmCensorCurve(nocens)) ==
        doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("metric guards") {
  const data::Dataset ds = make_data({1.0, 2.0}, {1, 0});
  const KmCensorCurve km(ds);
  const SurvivalMatrix half = constant(2, {0.0, 3.0}, 0.5);
  // Past the last censoring the curve is 0, but nobody is left at risk to need the weight.
  CHECK(km.value(2.0) == 0.0);
  CHECK(ipcw_brier(half, ds, 2.5, km) == doctest::Approx(0.125));
  CHECK_THROWS_AS(ipcw_ibs(half, ds, {2.5}, km), NumericalError);
  CHECK_THROWS_AS(c_index(constant(3, {0.0, 3.0}, 0.5), ds), InputError);
  SurvivalMatrix bad = constant(2, {1.0, 1.0}, 0.5);
  CHECK_THROWS_AS(c_index(bad, ds), InputError);
  CHECK_THROWS_AS(uniform_grid(1.0, 1), InputError);
  CHECK(uniform_grid(2.0, 5)[1] == 0.5);
}
