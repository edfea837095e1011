// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace neuralsurv::numkit {

// Shared uniform time grid t_1 = 0 < ... < t_K = max_i y_i with per-observation
// trapezoid weights on [0, y_i]. Observation i integrates over the nodes
// t_1..t_{K_i}, K_i = max{k : t_k < y_i}, plus an endpoint node at y_i itself,
// so the weights of observation i always sum to y_i.
class QuadratureGrid {
 public:
  QuadratureGrid() = default;

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t observation_count() const { return end_.size(); }
  std::span<const double> nodes() const { return nodes_; }
  double node(std::size_t k) const { return nodes_[k]; }
  double horizon() const { return nodes_.back(); }

  // Number of shared nodes strictly below y_i (K_i, 1-based count).
  std::size_t cutoff(std::size_t i) const { return cutoff_[i]; }
  // Weights of the shared nodes for observation i; length node_count(), zero past cutoff(i).
  std::span<const double> weights(std::size_t i) const {
    return {weights_.data() + i * nodes_.size(), nodes_.size()};
  }
  double endpoint(std::size_t i) const { return end_[i]; }
  double endpoint_weight(std::size_t i) const { return end_weight_[i]; }

  // sum_k v_ik f(t_k) + v_i,end f(y_i); node_values needs at least cutoff(i) entries.
  double integrate(std::size_t i, std::span<const double> node_values, double endpoint_value) const;

  friend QuadratureGrid build_grid(std::span<const double> times, std::size_t K);
  friend QuadratureGrid build_grid(std::span<const double> times, std::span<const double> nodes);

 private:
  std::vector<double> nodes_;
  std::vector<std::size_t> cutoff_;
  std::vector<double> weights_;
  std::vector<double> end_;
  std::vector<double> end_weight_;
};

// Uniform grid of K >= 2 nodes on [0, max y_i]. Throws InputError on an empty
// time list, K < 2 or any y_i <= 0.
QuadratureGrid build_grid(std::span<const double> times, std::size_t K);

// Same weights over caller-provided strictly increasing nodes starting at 0.
QuadratureGrid build_grid(std::span<const double> times, std::span<const double> nodes);

// Trapezoid weights of an arbitrary increasing abscissa (used for cumulative
// hazards and metric integrals).
std::vector<double> trapezoid_weights(std::span<const double> abscissa);

}  // namespace neuralsurv::numkit
