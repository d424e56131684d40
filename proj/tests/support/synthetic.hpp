#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "rttlab/random.hpp"

namespace rttlab::testing {

// x_k = mu + s * z_k with z_k = rho * z_{k-1} + sqrt(1 - rho^2) * eps_k, so z has unit variance.
inline std::vector<double> ar1(std::size_t n, double rho, double mu, double s, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> x(n);
  double z = nd(rng);
  for (auto& v : x) {
    z = rho * z + std::sqrt(1.0 - rho * rho) * nd(rng);
    v = mu + s * z;
  }
  return x;
}

inline std::vector<double> white_noise(std::size_t n, double mu, double s, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd(mu, s);
  std::vector<double> x(n);
  for (auto& v : x) v = nd(rng);
  return x;
}

inline std::vector<double> sine(std::size_t n, double mu, double amplitude, double period, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = mu + amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / period + phase);
  }
  return x;
}

inline std::vector<double> uniform(std::size_t n, double lo, double hi, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> ud(lo, hi);
  std::vector<double> x(n);
  for (auto& v : x) v = ud(rng);
  return x;
}

}  // namespace rttlab::testing
