#include <doctest.h>

#include <cmath>

#include "starpose/errors.hpp"
#include "starpose/mixture.hpp"

using namespace starpose;

namespace {

Tensor gaussian_blob_1d(double mean_a, double mean_b, double sigma, int n, std::uint64_t seed) {
  Tensor data({n, 1});
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const double mean = (i % 2 == 0) ? mean_a : mean_b;
    data(i, 0) = mean + sigma * rng.normal();
  }
  return data;
}

}  // namespace

TEST_CASE("single-component EM reduces to sample mean and biased variance") {
  Tensor data({6, 2});
  Rng rng(5);
  for (std::int64_t i = 0; i < data.size(); ++i) data[i] = rng.uniform(-3.0, 3.0);
  const EmResult result = fit_em(data, 1, 42, EmOptions{});
  for (int d = 0; d < 2; ++d) {
    double mean = 0.0;
    for (int i = 0; i < 6; ++i) mean += data(i, d);
    mean /= 6.0;
    double var = 0.0;
    for (int i = 0; i < 6; ++i) var += (data(i, d) - mean) * (data(i, d) - mean);
    var /= 6.0;
    CHECK(result.model.means(0, d) == doctest::Approx(mean).epsilon(1e-12));
    CHECK(result.model.vars(0, d) == doctest::Approx(var).epsilon(1e-10));
  }
  CHECK(result.model.weights[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("two-component recovery on well-separated 1-D data") {
  const Tensor data = gaussian_blob_1d(-5.0, 5.0, 0.5, 2000, 99);
  const EmResult result = fit_em(data, 2, 7, EmOptions{});
  double lo = result.model.means(0, 0), hi = result.model.means(1, 0);
  if (lo > hi) std::swap(lo, hi);
  CHECK(std::abs(lo - (-5.0)) <= 0.25);  // within 5% of |mean|
  CHECK(std::abs(hi - 5.0) <= 0.25);
  CHECK(validate_gmm(result.model).empty());
}

TEST_CASE("log-likelihood trace is monotone non-decreasing") {
  const Tensor data = gaussian_blob_1d(-2.0, 3.0, 1.2, 400, 123);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const EmResult result = fit_em(data, 3, seed, EmOptions{});
    for (std::size_t i = 1; i < result.log_likelihoods.size(); ++i) {
      CHECK(result.log_likelihoods[i] >= result.log_likelihoods[i - 1] - 1e-9);
    }
  }
}

TEST_CASE("EM rejects empty or undersized data") {
  Tensor empty({0, 3});
  CHECK_THROWS_AS(fit_em(empty, 1, 0, EmOptions{}), DataError);
  Tensor tiny({2, 3});
  CHECK_THROWS_AS(fit_em(tiny, 5, 0, EmOptions{}), DataError);
}

TEST_CASE("sampling determinism and centred noise identity") {
  const Tensor data = gaussian_blob_1d(-1.0, 4.0, 0.8, 300, 21);
  const GmmModel gmm = fit_em(data, 2, 3, EmOptions{}).model;

  const auto a = gmm_sample_n(gmm, 10, 77);
  const auto b = gmm_sample_n(gmm, 10, 77);
  CHECK(a == b);  // bit-identical

  // A sample is the centred draw plus the mixture mean on a shared stream.
  Rng rs(55), rc(55);
  const auto sample = gmm_sample(gmm, rs);
  auto centred = gmm_centered_noise(gmm, rc);
  for (int d = 0; d < gmm.dim(); ++d) centred[d] += gmm.mixture_mean[d];
  CHECK(sample == centred);
}

TEST_CASE("floor-variance single component collapses to its mean") {
  GmmModel gmm;
  gmm.weights = Tensor({1});
  gmm.weights[0] = 1.0;
  gmm.means = Tensor({1, 3});
  gmm.means(0, 0) = 1.0;
  gmm.means(0, 1) = -2.0;
  gmm.means(0, 2) = 0.5;
  gmm.vars = Tensor({1, 3});
  for (int d = 0; d < 3; ++d) gmm.vars(0, d) = 1e-6;
  gmm.mixture_mean = Tensor({3});
  for (int d = 0; d < 3; ++d) gmm.mixture_mean[d] = gmm.means(0, d);

  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const auto s = gmm_sample(gmm, rng);
    for (int d = 0; d < 3; ++d) CHECK(std::abs(s[d] - gmm.means(0, d)) <= 6e-3);
    const auto eps = gmm_centered_noise(gmm, rng);
    for (int d = 0; d < 3; ++d) CHECK(std::abs(eps[d]) <= 6e-3);
  }
}

TEST_CASE("Monte-Carlo: sample mean approaches the mixture mean") {
  const Tensor data = gaussian_blob_1d(-3.0, 2.0, 1.0, 500, 31);
  const GmmModel gmm = fit_em(data, 2, 11, EmOptions{}).model;

  const int n = 100000;
  Rng rng(1234);
  double mean = 0.0, mean_eps = 0.0;
  for (int i = 0; i < n; ++i) {
    mean += gmm_sample(gmm, rng)[0];
    mean_eps += gmm_centered_noise(gmm, rng)[0];
  }
  mean /= n;
  mean_eps /= n;

  // Mixture standard deviation bounds the standard error.
  double second = 0.0;
  for (int m = 0; m < gmm.components(); ++m) {
    second += gmm.weights[m] * (gmm.vars(m, 0) + gmm.means(m, 0) * gmm.means(m, 0));
  }
  const double stddev = std::sqrt(second - gmm.mixture_mean[0] * gmm.mixture_mean[0]);
  const double bound = 3.0 * stddev / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean - gmm.mixture_mean[0]) <= bound);
  CHECK(std::abs(mean_eps) <= bound);
}

TEST_CASE("log likelihood: closed form at the mean and additivity") {
  GmmModel gmm;
  gmm.weights = Tensor({1});
  gmm.weights[0] = 1.0;
  gmm.means = Tensor({1, 4});
  gmm.vars = Tensor({1, 4});
  double log_det = 0.0;
  for (int d = 0; d < 4; ++d) {
    gmm.means(0, d) = d * 0.3;
    gmm.vars(0, d) = 0.5 + 0.2 * d;
    log_det += std::log(gmm.vars(0, d));
  }
  gmm.mixture_mean = Tensor({4});
  for (int d = 0; d < 4; ++d) gmm.mixture_mean[d] = gmm.means(0, d);

  Tensor at_mean({1, 4});
  for (int d = 0; d < 4; ++d) at_mean(0, d) = gmm.means(0, d);
  const double expect = -0.5 * (4.0 * std::log(2.0 * 3.14159265358979323846) + log_det);
  CHECK(gmm_log_likelihood(gmm, at_mean) == doctest::Approx(expect).epsilon(1e-12));

  Tensor doubled({2, 4});
  for (int d = 0; d < 4; ++d) {
    doubled(0, d) = at_mean(0, d);
    doubled(1, d) = at_mean(0, d);
  }
  CHECK(gmm_log_likelihood(gmm, doubled) ==
        doctest::Approx(2.0 * gmm_log_likelihood(gmm, at_mean)).epsilon(1e-14));

  Tensor empty({0, 4});
  CHECK_THROWS_AS(gmm_log_likelihood(gmm, empty), DataError);
}

TEST_CASE("log likelihood matches an unstabilized naive oracle") {
  const Tensor data = gaussian_blob_1d(-1.0, 1.5, 0.7, 40, 61);
  const GmmModel gmm = fit_em(data, 2, 19, EmOptions{}).model;
  double naive = 0.0;
  for (std::int64_t i = 0; i < data.rows(); ++i) {
    double density = 0.0;
    for (int m = 0; m < gmm.components(); ++m) {
      const double diff = data(i, 0) - gmm.means(m, 0);
      const double var = gmm.vars(m, 0);
      density += gmm.weights[m] * std::exp(-0.5 * diff * diff / var) /
                 std::sqrt(2.0 * 3.14159265358979323846 * var);
    }
    naive += std::log(density);
  }
  CHECK(gmm_log_likelihood(gmm, data) == doctest::Approx(naive).epsilon(1e-10));
}
