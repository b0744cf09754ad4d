#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "starpose/rng.hpp"
#include "starpose/tensor.hpp"

namespace starpose {

// Diagonal-covariance Gaussian mixture over flattened 3D poses. Immutable
// after fitting.
struct GmmModel {
  Tensor weights;       // {M}
  Tensor means;         // {M, D}
  Tensor vars;          // {M, D}, every entry >= the variance floor
  Tensor mixture_mean;  // {D}, cached sum of weights[m] * means[m]

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return static_cast<int>(mixture_mean.size()); }
};

struct EmOptions {
  int max_iters = 200;
  double tol = 1e-7;              // stop when log-likelihood gain drops below
  double variance_floor = 1e-6;   // mm^2; prevents component collapse
};

struct EmResult {
  GmmModel model;
  std::vector<double> log_likelihoods;  // one entry per completed iteration
  std::vector<std::string> events;      // re-seeded components etc.
};

// Expectation-Maximization with k-means++-style seeding from `seed`.
// data is {n, D}; requires n >= components.
EmResult fit_em(const Tensor& data, int components, std::uint64_t seed, const EmOptions& opts);

// Mean-centred mixture draw: pick a component by weight, draw a diagonal
// Gaussian sample, subtract the mixture mean. Expectation is exactly zero.
std::vector<double> gmm_centered_noise(const GmmModel& gmm, Rng& rng);

// A mixture sample is the centred draw plus the mixture mean, added
// term-by-term so the two calls agree bit-for-bit on a shared stream.
std::vector<double> gmm_sample(const GmmModel& gmm, Rng& rng);

std::vector<std::vector<double>> gmm_sample_n(const GmmModel& gmm, int n, std::uint64_t seed);

// Log density summed over rows, log-sum-exp stabilized.
double gmm_log_likelihood(const GmmModel& gmm, const Tensor& data);

std::vector<std::string> validate_gmm(const GmmModel& gmm);

}  // namespace starpose
