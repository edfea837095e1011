// Licensed under the Apache License 2.0 (see LICENSE file).

#include "model/marked_pp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "common/errors.hpp"
#include "numkit/special.hpp"

namespace neuralsurv::model {

double sample_pg_series(double b, double c, numkit::RngStream& rng, std::size_t terms) {
  if (!(b > 0.0)) throw InputError("sample_pg_series: b must be > 0");
  constexpr double kTwoPiSq = 2.0 * std::numbers::pi * std::numbers::pi;
  const double shift = c * c / (4.0 * std::numbers::pi * std::numbers::pi);
  double acc = 0.0;
  for (std::size_t k = 1; k <= terms; ++k) {
    const double h = static_cast<double>(k) - 0.5;
    const double gk = b == 1.0 ? -std::log(rng.uniform()) : rng.gamma(b, 1.0);
    acc += gk / (h * h + shift);
  }
  return acc / kTwoPiSq;
}

double BaselineIntensity::operator()(double t) const {
  return phi * time_power(t, rho, 1.0) / z(t);
}

std::vector<MarkedPoint> sample_marked_pp(const BaselineIntensity& intensity, double y, numkit::RngStream& rng,
                                          std::size_t pg_terms) {
  if (!(intensity.phi > 0.0) || !(intensity.rho > 0.0)) throw InputError("sample_marked_pp: phi and rho must be > 0");
  if (!(y > 0.0)) throw InputError("sample_marked_pp: y must be > 0");
  constexpr int kProbe = 256;
  double z_min = 1.0;
  for (int k = 0; k <= kProbe; ++k) z_min = std::min(z_min, intensity.z(y * k / kProbe));
  z_min *= 1.0 - 1e-3;
  // Dominating process phi t^(rho-1) / z_min has cumulative intensity phi y^rho / (rho z_min).
  const double total = intensity.phi * std::pow(y, intensity.rho) / (intensity.rho * z_min);
  const auto n = rng.poisson(total);
  std::vector<MarkedPoint> pts;
  for (std::uint64_t j = 0; j < n; ++j) {
    const double t = y * std::pow(rng.uniform(), 1.0 / intensity.rho);
    if (rng.uniform() * intensity.z(t) > z_min) continue;
    pts.push_back({t, 0.0});
  }
  std::sort(pts.begin(), pts.end(), [](const MarkedPoint& a, const MarkedPoint& b) { return a.t < b.t; });
  for (auto& p : pts) p.omega = sample_pg_series(1.0, 0.0, rng, pg_terms);
  return pts;
}

std::vector<MarkedPoint> sample_marked_pp(const HazardContext& ctx, double phi, double y, std::size_t obs,
                                          numkit::RngStream& rng) {
  const auto x = ctx.dataset().covariates(obs);
  const auto& model = ctx.linearized().model();
  BaselineIntensity intensity{phi, ctx.prior().rho, [&model, x](double t) { return normalizer_Z(model, t, x); }};
  return sample_marked_pp(intensity, y, rng);
}

MonteCarloEstimate augmented_survival_factor(const BaselineIntensity& intensity, const std::function<double(double)>& g,
                                             double y, std::size_t draws, numkit::RngStream& rng,
                                             std::size_t pg_terms) {
  if (draws < 2) throw InputError("augmented_survival_factor: need at least 2 draws");
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t d = 0; d < draws; ++d) {
    double log_prod = 0.0;
    for (const auto& p : sample_marked_pp(intensity, y, rng, pg_terms)) log_prod += numkit::pg_f(p.omega, -g(p.t));
    const double v = std::exp(log_prod);
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(draws);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n), draws};
}

double survival_factor(const BaselineIntensity& intensity, const std::function<double(double)>& g, double y,
                       std::size_t panels) {
  if (panels % 2 == 1) ++panels;
  const double h = y / static_cast<double>(panels);
  const auto f = [&](double t) { return intensity(t) * numkit::sigmoid(g(t)); };
  double acc = f(0.0) + f(y);
  for (std::size_t k = 1; k < panels; ++k) acc += (k % 2 == 1 ? 4.0 : 2.0) * f(h * static_cast<double>(k));
  return std::exp(-acc * h / 3.0);
}

}  // namespace neuralsurv::model
