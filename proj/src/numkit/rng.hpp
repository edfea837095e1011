// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <cstdint>
#include <random>

namespace neuralsurv::numkit {

// Deterministic single-owner random stream. Not shareable across threads;
// derive() hands out independent child streams by seed mixing.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  RngStream derive(std::uint64_t stream_id) const;

  double uniform();  // (0, 1)
  double normal(double mean = 0.0, double sd = 1.0);
  double lognormal(double mu, double sigma);
  double exponential(double rate);
  double gamma(double shape, double rate);
  std::uint64_t poisson(double mean);
  bool bernoulli(double p);
  std::uint64_t uniform_index(std::uint64_t n);  // [0, n)

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream_id);

}  // namespace neuralsurv::numkit
