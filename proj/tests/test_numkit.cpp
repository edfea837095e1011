// Licensed under the Apache License 2.0 (see LICENSE file).

#include <algorithm>
#include <boost/math/distributions/exponential.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "common/errors.hpp"
#include "doctest.h"
#include "numkit/grid.hpp"
#include "numkit/rng.hpp"
#include "numkit/special.hpp"

using namespace neuralsurv;
using namespace neuralsurv::numkit;

namespace {

// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double F = cdf(xs[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - F, F - static_cast<double>(i) / n});
  }
  return d;
}

// Critical value at level 0.001.
double ks_critical(std::size_t n) { return 1.949 / std::sqrt(static_cast<double>(n)); }

// PG(1, c) by its gamma series, written out here independently of the library sampler.
double pg_series_draw(double c, RngStream& rng) {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  double s = 0.0;
  for (int k = 1; k <= 2000; ++k) {
    const double d = (k - 0.5) * (k - 0.5) + c * c / (4.0 * pi2);
    s += rng.exponential(1.0) / d;
  }
  return s / (2.0 * pi2);
}

// Euler-Maclaurin evaluation of digamma in long double: shift by N then the asymptotic tail.
long double digamma_em(long double x) {
  long double acc = 0.0L;
  const int N = 60;
  for (int n = 0; n < N; ++n) acc -= 1.0L / (x + n);
  const long double z = x + N;
  const long double z2 = z * z;
  acc += std::log(z) - 1.0L / (2.0L * z) - 1.0L / (12.0L * z2) + 1.0L / (120.0L * z2 * z2) -
         1.0L / (252.0L * z2 * z2 * z2);
  return acc;
}

}  // namespace

TEST_CASE("sigmoid basics") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(3.7) + sigmoid(-3.7) == doctest::Approx(1.0).epsilon(1e-15));
  using big = boost::multiprecision::cpp_bin_float_50;
  const big ref = big(1) / (big(1) + exp(big(-2)));
  CHECK(std::abs(sigmoid(2.0) - ref.convert_to<double>()) < 1e-12);
  for (double z : {-800.0, -701.0, 701.0, 800.0}) {
    CHECK(std::isfinite(sigmoid(z)));
    CHECK(sigmoid(z) >= 0.0);
    CHECK(sigmoid(z) <= 1.0);
  }
  CHECK(std::isfinite(log_sigmoid(-800.0)));
  CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0));
  double prev = 0.0;
  for (double z = -40.0; z <= 40.0; z += 0.5) {
    CHECK(sigmoid(z) >= prev);
    prev = sigmoid(z);
  }
}

TEST_CASE("pg_f direct values") {
  CHECK(pg_f(0.0, 0.0) == doctest::Approx(-std::log(2.0)));
  CHECK(pg_f(3.3, 0.0) == doctest::Approx(-std::log(2.0)));
  CHECK(pg_f(0.25, 2.0) == doctest::Approx(1.0 - 0.5 - std::log(2.0)));
}

TEST_CASE("pg_mean limits and symmetry") {
  CHECK(pg_mean(1.0, 0.0) == 0.25);
  CHECK(pg_mean(1.0, 2.0) == pg_mean(1.0, -2.0));
  CHECK(pg_mean(2.0, 0.0) == doctest::Approx(0.5));

  RngStream rng(2024);
  for (int i = 0; i < 200; ++i) {
    const double c = std::exp(std::log(1e-6) + rng.uniform() * (std::log(1e3) - std::log(1e-6)));
    CHECK(2.0 * c * pg_mean(1.0, c) == doctest::Approx(std::tanh(c / 2.0)).epsilon(1e-12));
  }
  const double s = kPgMeanTaylorSwitch;
  const long double exact = std::tanh(static_cast<long double>(s) / 2.0L) / (2.0L * s);
  CHECK(std::abs(pg_mean(1.0, s * (1.0 - 1e-12)) - static_cast<double>(exact)) < 1e-10);
  CHECK(std::abs(pg_mean(1.0, s) - static_cast<double>(exact)) < 1e-10);
}

TEST_CASE("pg_mean against gamma-series Monte Carlo") {
  RngStream rng(99);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = pg_series_draw(2.0, rng);
    sum += w;
    sum2 += w * w;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  CHECK(std::abs(mean - pg_mean(1.0, 2.0)) < 3.0 * se);
}

TEST_CASE("digamma and log_gamma") {
  CHECK(std::abs(digamma(4.5) - digamma(3.5) - 1.0 / 3.5) < 1e-10);
  CHECK(std::abs(digamma(1.0) - static_cast<double>(digamma_em(1.0L))) < 1e-9);
  CHECK(std::abs(digamma(1.0) + 0.57721566490153286) < 1e-10);
  RngStream rng(5);
  for (int i = 0; i < 100; ++i) {
    const double x = std::exp(-5.0 + 12.0 * rng.uniform());
    CHECK(std::abs(digamma(x) - boost::math::digamma(x)) < 1e-10 * std::max(1.0, std::abs(boost::math::digamma(x))));
    CHECK(std::abs(log_gamma(x) - boost::math::lgamma(x)) < 1e-10 * std::max(1.0, std::abs(boost::math::lgamma(x))));
  }
  CHECK(std::abs(log_gamma(5.0) - std::log(24.0)) < 1e-12);
  CHECK_THROWS_AS(digamma(0.0), InputError);
  CHECK_THROWS_AS(digamma(-1.0), InputError);
  CHECK_THROWS_AS(log_gamma(0.0), InputError);
}

TEST_CASE("build_grid trapezoid weights") {
  const std::vector<double> y1{1.0};
  const QuadratureGrid g3 = build_grid(y1, 3);
  REQUIRE(g3.node_count() == 3);
  CHECK(g3.cutoff(0) == 2);
  CHECK(g3.weights(0)[0] == doctest::Approx(0.25));
  CHECK(g3.weights(0)[1] == doctest::Approx(0.5));
  CHECK(g3.weights(0)[2] == 0.0);
  CHECK(g3.endpoint_weight(0) == doctest::Approx(0.25));

  auto integrate = [](const QuadratureGrid& g, std::size_t i, const std::function<double(double)>& f) {
    std::vector<double> v(g.node_count());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = f(g.node(k));
    return g.integrate(i, v, f(g.endpoint(i)));
  };
  const QuadratureGrid g201 = build_grid(y1, 201);
  CHECK(std::abs(integrate(g201, 0, [](double t) { return t; }) - 0.5) < 1e-4);
  const QuadratureGrid g401 = build_grid(y1, 401);
  CHECK(std::abs(integrate(g401, 0, [](double t) { return std::exp(t); }) - (std::exp(1.0) - 1.0)) < 1e-5);
}

TEST_CASE("build_grid weights on irregular data") {
  RngStream rng(17);
  std::vector<double> ys(40);
  for (double& y : ys) y = 0.01 + 3.0 * rng.uniform();
  const QuadratureGrid g = build_grid(ys, 37);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    double s = g.endpoint_weight(i);
    CHECK(g.endpoint_weight(i) >= 0.0);
    const auto w = g.weights(i);
    for (std::size_t k = 0; k < w.size(); ++k) {
      CHECK(w[k] >= 0.0);
      if (k >= g.cutoff(i)) CHECK(w[k] == 0.0);
      s += w[k];
    }
    CHECK(std::abs(s - ys[i]) < 1e-12);
    CHECK(g.node(g.cutoff(i) - 1) < ys[i]);
    if (g.cutoff(i) < g.node_count()) CHECK(g.node(g.cutoff(i)) >= ys[i]);
    // Linear functions are integrated exactly.
    std::vector<double> v(g.node_count());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = 2.0 * g.node(k) + 1.0;
    CHECK(g.integrate(i, v, 2.0 * ys[i] + 1.0) == doctest::Approx(ys[i] * ys[i] + ys[i]).epsilon(1e-12));
  }
  CHECK(g.horizon() == *std::max_element(ys.begin(), ys.end()));
}

TEST_CASE("build_grid errors") {
  const std::vector<double> empty;
  CHECK_THROWS_AS(build_grid(empty, 10), InputError);
  const std::vector<double> ok{1.0, 2.0};
  CHECK_THROWS_AS(build_grid(ok, 1), InputError);
  const std::vector<double> bad{1.0, 0.0};
  CHECK_THROWS_AS(build_grid(bad, 10), InputError);
}

TEST_CASE("trapezoid weights") {
  const std::vector<double> a{0.0, 0.5, 2.0};
  const auto w = trapezoid_weights(a);
  REQUIRE(w.size() == 3);
  CHECK(w[0] == doctest::Approx(0.25));
  CHECK(w[1] == doctest::Approx(1.0));
  CHECK(w[2] == doctest::Approx(0.75));
}

TEST_CASE("sampler moments") {
  const int n = 100000;
  RngStream rng(123);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += rng.exponential(0.025);
  CHECK(std::abs(s / n - 40.0) < 1.0);

  std::vector<double> ln(n);
  for (double& v : ln) v = rng.lognormal(3.0, 0.8);
  std::nth_element(ln.begin(), ln.begin() + n / 2, ln.end());
  CHECK(std::abs(ln[n / 2] / std::exp(3.0) - 1.0) < 0.03);

  s = 0.0;
  for (int i = 0; i < n; ++i) s += rng.gamma(2.0, 3.0);
  CHECK(std::abs(s / n / (2.0 / 3.0) - 1.0) < 0.02);
}

TEST_CASE("sampler distributions pass KS") {
  const std::size_t n = 100000;
  RngStream rng(321);
  std::vector<double> xs(n);

  for (double& v : xs) v = rng.normal(1.5, 2.0);
  boost::math::normal_distribution<> nd(1.5, 2.0);
  CHECK(ks_statistic(xs, [&](double x) { return boost::math::cdf(nd, x); }) < ks_critical(n));

  for (double& v : xs) v = rng.lognormal(3.0, 0.8);
  boost::math::lognormal_distribution<> lnd(3.0, 0.8);
  CHECK(ks_statistic(xs, [&](double x) { return boost::math::cdf(lnd, x); }) < ks_critical(n));

  for (double& v : xs) v = rng.exponential(0.025);
  boost::math::exponential_distribution<> ed(0.025);
  CHECK(ks_statistic(xs, [&](double x) { return boost::math::cdf(ed, x); }) < ks_critical(n));

  for (double shape : {0.3, 2.0, 7.5}) {
    for (double& v : xs) v = rng.gamma(shape, 3.0);
    boost::math::gamma_distribution<> gd(shape, 1.0 / 3.0);
    CHECK(ks_statistic(xs, [&](double x) { return boost::math::cdf(gd, x); }) < ks_critical(n));
  }

  for (double& v : xs) v = rng.uniform();
  CHECK(ks_statistic(xs, [](double x) { return x; }) < ks_critical(n));

  // Discrete: the empirical CDF at every integer stays within the KS band.
  for (double mean : {0.7, 4.0, 60.0}) {
    std::vector<std::size_t> counts(1000, 0);
    for (std::size_t i = 0; i < n; ++i) ++counts[std::min<std::uint64_t>(rng.poisson(mean), 999)];
    boost::math::poisson_distribution<> pd(mean);
    double acc = 0.0, d = 0.0;
    for (std::size_t k = 0; k < 200; ++k) {
      acc += static_cast<double>(counts[k]) / static_cast<double>(n);
      d = std::max(d, std::abs(acc - boost::math::cdf(pd, static_cast<double>(k))));
    }
    CHECK(d < ks_critical(n));
  }
}

TEST_CASE("sampler determinism and errors") {
  RngStream a(77), b(77);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.normal() == b.normal());
    CHECK(a.gamma(1.7, 2.0) == b.gamma(1.7, 2.0));
    CHECK(a.poisson(3.0) == b.poisson(3.0));
  }
  RngStream c = RngStream(77).derive(1), d = RngStream(77).derive(1), e = RngStream(77).derive(2);
  const double x = c.uniform();
  CHECK(x == d.uniform());
  CHECK(x != e.uniform());

  RngStream r(1);
  CHECK_THROWS_AS(r.exponential(0.0), InputError);
  CHECK_THROWS_AS(r.exponential(-1.0), InputError);
  CHECK_THROWS_AS(r.gamma(0.0, 1.0), InputError);
  CHECK_THROWS_AS(r.gamma(1.0, -1.0), InputError);
  CHECK_THROWS_AS(r.normal(0.0, -1.0), InputError);
  CHECK_THROWS_AS(r.lognormal(0.0, 0.0), InputError);
  CHECK_THROWS_AS(r.poisson(-1.0), InputError);
}
