#pragma once

// Low-pass filtered Gaussian actuation noise n' = -k n + mu, mu ~ N(0, q^2 I3),
// discretized with explicit Euler and mu held over each step.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>

namespace sflc {

struct NoiseState {
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  double k = 0.1;
  double q = 0.4;
  std::uint64_t seed = 0;
  std::mt19937_64 rng;
  std::normal_distribution<double> normal{0.0, 1.0};

  static NoiseState make(double k, double q, std::uint64_t seed) {
    if (!(k > 0.0)) throw std::invalid_argument("noise filter pole k must be positive");
    if (!(q >= 0.0)) throw std::invalid_argument("noise intensity q must be non-negative");
    NoiseState ns;
    ns.k = k;
    ns.q = q;
    ns.seed = seed;
    ns.rng.seed(seed);
    return ns;
  }
};

inline NoiseState noise_step(NoiseState ns, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("noise_step: dt must be positive");
  Eigen::Vector3d mu;
  for (int i = 0; i < 3; ++i) mu[i] = ns.q * ns.normal(ns.rng);
  ns.n += dt * (-ns.k * ns.n + mu);
  return ns;
}

}  // namespace sflc
