// Licensed under the Apache License 2.0 (see LICENSE file).

#include "numkit/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "common/errors.hpp"

namespace neuralsurv::numkit {

QuadratureGrid build_grid(std::span<const double> times, std::size_t K) {
  if (times.empty()) throw InputError("build_grid: empty dataset");
  if (K < 2) throw InputError("build_grid: need at least 2 grid nodes");
  const double t_max = *std::max_element(times.begin(), times.end());
  if (!(t_max > 0.0)) throw InputError("build_grid: observed times must be > 0");
  std::vector<double> nodes(K);
  for (std::size_t k = 0; k < K; ++k) nodes[k] = t_max * static_cast<double>(k) / static_cast<double>(K - 1);
  nodes.back() = t_max;
  return build_grid(times, nodes);
}

QuadratureGrid build_grid(std::span<const double> times, std::span<const double> nodes) {
  if (times.empty()) throw InputError("build_grid: empty dataset");
  if (nodes.size() < 2 || nodes.front() != 0.0) throw InputError("build_grid: nodes must start at 0 and have >= 2 entries");
  for (std::size_t k = 1; k < nodes.size(); ++k)
    if (!(nodes[k] > nodes[k - 1])) throw InputError("build_grid: nodes must be strictly increasing");

  QuadratureGrid g;
  const std::size_t K = nodes.size();
  const std::size_t N = times.size();
  g.nodes_.assign(nodes.begin(), nodes.end());
  g.cutoff_.resize(N);
  g.weights_.assign(N * K, 0.0);
  g.end_.resize(N);
  g.end_weight_.resize(N);

  for (std::size_t i = 0; i < N; ++i) {
    const double y = times[i];
    if (!(y > 0.0) || !std::isfinite(y))
      throw InputError("build_grid: observation " + std::to_string(i) + " has non-positive time");
    // K_i = max{k : t_k < y}; t_1 = 0 < y so K_i >= 1.
    const auto it = std::lower_bound(g.nodes_.begin(), g.nodes_.end(), y);
    const std::size_t Ki = static_cast<std::size_t>(it - g.nodes_.begin());
    g.cutoff_[i] = Ki;
    g.end_[i] = y;
    double* w = g.weights_.data() + i * K;
    // Trapezoid over the abscissa t_1, ..., t_{K_i}, y.
    for (std::size_t k = 0; k < Ki; ++k) {
      const double left = k == 0 ? 0.0 : nodes[k] - nodes[k - 1];
      const double right = (k + 1 < Ki ? nodes[k + 1] : y) - nodes[k];
      w[k] = 0.5 * (left + right);
    }
    g.end_weight_[i] = 0.5 * (y - nodes[Ki - 1]);
  }
  return g;
}

double QuadratureGrid::integrate(std::size_t i, std::span<const double> node_values, double endpoint_value) const {
  const auto w = weights(i);
  double acc = 0.0;
  for (std::size_t k = 0; k < cutoff_[i]; ++k) acc += w[k] * node_values[k];
  return acc + end_weight_[i] * endpoint_value;
}

std::vector<double> trapezoid_weights(std::span<const double> x) {
  std::vector<double> w(x.size(), 0.0);
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    const double h = 0.5 * (x[k + 1] - x[k]);
    w[k] += h;
    w[k + 1] += h;
  }
  return w;
}

}  // namespace neuralsurv::numkit
