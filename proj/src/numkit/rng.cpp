// Licensed under the Apache License 2.0 (see LICENSE file).

#include "numkit/rng.hpp"

#include <cmath>

#include "common/errors.hpp"

namespace neuralsurv::numkit {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream_id) {
  // splitmix64 finalizer over the pair.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream_id + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

RngStream RngStream::derive(std::uint64_t stream_id) const { return RngStream(mix_seed(seed_, stream_id)); }

double RngStream::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal(double mean, double sd) {
  if (!(sd > 0.0)) throw InputError("normal: sd must be > 0");
  return std::normal_distribution<double>(mean, sd)(engine_);
}

double RngStream::lognormal(double mu, double sigma) {
  if (!(sigma > 0.0)) throw InputError("lognormal: sigma must be > 0");
  return std::lognormal_distribution<double>(mu, sigma)(engine_);
}

double RngStream::exponential(double rate) {
  if (!(rate > 0.0)) throw InputError("exponential: rate must be > 0");
  return -std::log(uniform()) / rate;
}

double RngStream::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw InputError("gamma: shape and rate must be > 0");
  return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
}

std::uint64_t RngStream::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw InputError("poisson: mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  return static_cast<std::uint64_t>(std::poisson_distribution<long long>(mean)(engine_));
}

bool RngStream::bernoulli(double p) { return uniform() < p; }

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw InputError("uniform_index: empty range");
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
}

}  // namespace neuralsurv::numkit
