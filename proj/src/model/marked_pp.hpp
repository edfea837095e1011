// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "model/hazard.hpp"
#include "numkit/rng.hpp"

namespace neuralsurv::model {

struct MarkedPoint {
  double t;
  double omega;
};

// Draw from PG(b, c) by truncating its infinite gamma-series representation.
double sample_pg_series(double b, double c, numkit::RngStream& rng, std::size_t terms = 2000);

// Baseline intensity phi * t^(rho-1) / Z(t) on [0, y].
struct BaselineIntensity {
  double phi = 1.0;
  double rho = 1.0;
  std::function<double(double)> z = [](double) { return 0.5; };

  double operator()(double t) const;
};

// Marked Poisson process on [0, y] x R+ with intensity lambda_0(t) p_PG(w | 1, 0):
// locations by inverse-CDF sampling of the t^(rho-1) profile thinned by
// min Z / Z(t); marks from the truncated PG(1, 0) series. Returned sorted by t.
std::vector<MarkedPoint> sample_marked_pp(const BaselineIntensity& intensity, double y, numkit::RngStream& rng,
                                          std::size_t pg_terms = 2000);

std::vector<MarkedPoint> sample_marked_pp(const HazardContext& ctx, double phi, double y, std::size_t obs,
                                          numkit::RngStream& rng);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t draws = 0;
};

// Monte-Carlo estimate of E[prod_j exp(f(w_j, -g(t_j)))] over the process above.
MonteCarloEstimate augmented_survival_factor(const BaselineIntensity& intensity, const std::function<double(double)>& g,
                                             double y, std::size_t draws, numkit::RngStream& rng,
                                             std::size_t pg_terms = 2000);

// exp(-int_0^y lambda_0(t) sigmoid(g(t)) dt) by composite Simpson with `panels` panels.
double survival_factor(const BaselineIntensity& intensity, const std::function<double(double)>& g, double y,
                       std::size_t panels = 20000);

}  // namespace neuralsurv::model
