// Licensed under the Apache License 2.0 (see LICENSE file).

#include "numkit/special.hpp"

#include <cmath>
#include <numbers>

#include "common/errors.hpp"

namespace neuralsurv::numkit {

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sigmoid(double z) noexcept {
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

double pg_f(double omega, double z) noexcept {
  return 0.5 * z - 0.5 * z * z * omega - std::numbers::ln2;
}

double pg_mean(double b, double c) noexcept {
  const double a = std::fabs(c);
  if (a < kPgMeanTaylorSwitch) return b * (0.25 - a * a / 48.0);
  return b / (2.0 * a) * std::tanh(0.5 * a);
}

double digamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw InputError("digamma: argument must be finite and > 0");
  // Shift into the asymptotic regime with psi(x) = psi(x+1) - 1/x.
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli-number series: -1/(2x) - sum B_2k / (2k x^2k).
  const double series =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
  return acc + std::log(x) - 0.5 * inv - series;
}

double log_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw InputError("log_gamma: argument must be finite and > 0");
  return std::lgamma(x);
}

}  // namespace neuralsurv::numkit
