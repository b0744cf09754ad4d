#include "starpose/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "starpose/errors.hpp"

namespace starpose {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_normal_diag(const double* x, const double* mean, const double* var, int dim) {
  double acc = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double diff = x[d] - mean[d];
    acc += std::log(var[d]) + diff * diff / var[d];
  }
  return -0.5 * (dim * kLog2Pi + acc);
}

// Log density of one row under the mixture, log-sum-exp stabilized.
double row_log_density(const GmmModel& gmm, const double* x) {
  const int M = gmm.components();
  const int D = gmm.dim();
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> lp(M, -std::numeric_limits<double>::infinity());
  for (int m = 0; m < M; ++m) {
    if (gmm.weights[m] <= 0.0) continue;
    lp[m] = std::log(gmm.weights[m]) + log_normal_diag(x, gmm.means.row(m), gmm.vars.row(m), D);
    best = std::max(best, lp[m]);
  }
  double sum = 0.0;
  for (int m = 0; m < M; ++m) sum += std::exp(lp[m] - best);
  return best + std::log(sum);
}

// k-means++ style seeding: spread the initial means over the data.
std::vector<int> seed_centers(const Tensor& data, int M, Rng& rng) {
  const int n = static_cast<int>(data.rows());
  const int D = static_cast<int>(data.cols());
  std::vector<int> centers;
  centers.push_back(static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n))));
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < M) {
    const double* c = data.row(centers.back());
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double d2 = 0.0;
      const double* x = data.row(i);
      for (int d = 0; d < D; ++d) {
        const double diff = x[d] - c[d];
        d2 += diff * diff;
      }
      min_d2[i] = std::min(min_d2[i], d2);
      total += min_d2[i];
    }
    int pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform01() * total;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += min_d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n)));
    }
    centers.push_back(pick);
  }
  return centers;
}

}  // namespace

EmResult fit_em(const Tensor& data, int components, std::uint64_t seed, const EmOptions& opts) {
  const int n = static_cast<int>(data.rows());
  if (n == 0) throw DataError("EM: empty data");
  if (components < 1 || n < components) {
    throw DataError("EM: need at least as many rows as components");
  }
  const int D = static_cast<int>(data.cols());
  const int M = components;

  // Global per-dimension variance used for initialization and re-seeding.
  std::vector<double> global_mean(D, 0.0), global_var(D, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* x = data.row(i);
    for (int d = 0; d < D; ++d) global_mean[d] += x[d];
  }
  for (int d = 0; d < D; ++d) global_mean[d] /= n;
  for (int i = 0; i < n; ++i) {
    const double* x = data.row(i);
    for (int d = 0; d < D; ++d) {
      const double diff = x[d] - global_mean[d];
      global_var[d] += diff * diff;
    }
  }
  for (int d = 0; d < D; ++d) global_var[d] = std::max(global_var[d] / n, opts.variance_floor);

  EmResult result;
  GmmModel& gmm = result.model;
  gmm.weights = Tensor({M});
  gmm.means = Tensor({M, D});
  gmm.vars = Tensor({M, D});
  gmm.mixture_mean = Tensor({D});

  Rng rng(seed);
  const std::vector<int> centers = seed_centers(data, M, rng);
  for (int m = 0; m < M; ++m) {
    gmm.weights[m] = 1.0 / M;
    const double* c = data.row(centers[m]);
    for (int d = 0; d < D; ++d) {
      gmm.means(m, d) = c[d];
      gmm.vars(m, d) = global_var[d];
    }
  }

  Tensor resp({n, M});
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    // E-step: responsibilities via log-sum-exp.
    for (int i = 0; i < n; ++i) {
      const double* x = data.row(i);
      double best = -std::numeric_limits<double>::infinity();
      for (int m = 0; m < M; ++m) {
        const double lp = std::log(gmm.weights[m]) +
                          log_normal_diag(x, gmm.means.row(m), gmm.vars.row(m), D);
        resp(i, m) = lp;
        best = std::max(best, lp);
      }
      double sum = 0.0;
      for (int m = 0; m < M; ++m) sum += std::exp(resp(i, m) - best);
      const double log_norm = best + std::log(sum);
      for (int m = 0; m < M; ++m) resp(i, m) = std::exp(resp(i, m) - log_norm);
    }

    // M-step.
    for (int m = 0; m < M; ++m) {
      double mass = 0.0;
      for (int i = 0; i < n; ++i) mass += resp(i, m);
      if (!(mass > n * 1e-12)) {
        // Degenerate component: responsibility mass underflowed. Re-seed it
        // at the point the current model explains worst.
        int worst = 0;
        double worst_ll = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
          const double ll = row_log_density(gmm, data.row(i));
          if (ll < worst_ll) {
            worst_ll = ll;
            worst = i;
          }
        }
        const double* x = data.row(worst);
        for (int d = 0; d < D; ++d) {
          gmm.means(m, d) = x[d];
          gmm.vars(m, d) = global_var[d];
        }
        gmm.weights[m] = 1.0 / n;
        result.events.push_back("iteration " + std::to_string(iter) +
                                ": re-seeded degenerate component " + std::to_string(m));
        continue;
      }
      gmm.weights[m] = mass / n;
      for (int d = 0; d < D; ++d) {
        double mu = 0.0;
        for (int i = 0; i < n; ++i) mu += resp(i, m) * data(i, d);
        mu /= mass;
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
          const double diff = data(i, d) - mu;
          var += resp(i, m) * diff * diff;
        }
        gmm.means(m, d) = mu;
        gmm.vars(m, d) = std::max(var / mass, opts.variance_floor);
      }
    }
    // Renormalize weights (exact sum 1 after possible re-seeding).
    double wsum = 0.0;
    for (int m = 0; m < M; ++m) wsum += gmm.weights[m];
    for (int m = 0; m < M; ++m) gmm.weights[m] /= wsum;

    const double ll = gmm_log_likelihood(gmm, data);
    result.log_likelihoods.push_back(ll);
    if (std::isfinite(prev_ll) && ll - prev_ll < opts.tol) break;
    prev_ll = ll;
  }

  for (int d = 0; d < D; ++d) {
    double acc = 0.0;
    for (int m = 0; m < M; ++m) acc += gmm.weights[m] * gmm.means(m, d);
    gmm.mixture_mean[d] = acc;
  }
  return result;
}

std::vector<double> gmm_centered_noise(const GmmModel& gmm, Rng& rng) {
  const int M = gmm.components();
  const int D = gmm.dim();
  const double u = rng.uniform01();
  int comp = M - 1;
  double acc = 0.0;
  for (int m = 0; m < M; ++m) {
    acc += gmm.weights[m];
    if (u < acc) {
      comp = m;
      break;
    }
  }
  std::vector<double> eps(D);
  const double* mean = gmm.means.row(comp);
  const double* var = gmm.vars.row(comp);
  for (int d = 0; d < D; ++d) {
    eps[d] = (mean[d] - gmm.mixture_mean[d]) + std::sqrt(var[d]) * rng.normal();
  }
  return eps;
}

std::vector<double> gmm_sample(const GmmModel& gmm, Rng& rng) {
  std::vector<double> s = gmm_centered_noise(gmm, rng);
  for (int d = 0; d < gmm.dim(); ++d) s[d] += gmm.mixture_mean[d];
  return s;
}

std::vector<std::vector<double>> gmm_sample_n(const GmmModel& gmm, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(gmm_sample(gmm, rng));
  return out;
}

double gmm_log_likelihood(const GmmModel& gmm, const Tensor& data) {
  if (data.rows() == 0) throw DataError("log likelihood: empty data");
  double total = 0.0;
  for (std::int64_t i = 0; i < data.rows(); ++i) total += row_log_density(gmm, data.row(i));
  return total;
}

std::vector<std::string> validate_gmm(const GmmModel& gmm) {
  std::vector<std::string> violations;
  const int M = gmm.components();
  const int D = gmm.dim();
  if (gmm.means.dims != std::vector<std::int64_t>{M, D} ||
      gmm.vars.dims != std::vector<std::int64_t>{M, D}) {
    violations.push_back("means/vars shape inconsistent with weights and mixture mean");
    return violations;
  }
  double wsum = 0.0;
  for (int m = 0; m < M; ++m) {
    if (gmm.weights[m] < 0.0) violations.push_back("negative component weight");
    wsum += gmm.weights[m];
  }
  if (std::abs(wsum - 1.0) > 1e-12) violations.push_back("weights do not sum to 1");
  for (std::int64_t i = 0; i < gmm.vars.size(); ++i) {
    if (!(gmm.vars[i] > 0.0)) violations.push_back("non-positive variance entry");
  }
  for (int d = 0; d < D; ++d) {
    double acc = 0.0;
    for (int m = 0; m < M; ++m) acc += gmm.weights[m] * gmm.means(m, d);
    if (std::abs(acc - gmm.mixture_mean[d]) > 1e-12 * std::max(1.0, std::abs(acc))) {
      violations.push_back("cached mixture mean out of date");
      break;
    }
  }
  return violations;
}

}  // namespace starpose
