#include "starpose/schedule.hpp"

#include <cmath>
#include <string>

#include "starpose/errors.hpp"

namespace starpose {

DiffusionSchedule linear_schedule(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw NumericalError("schedule needs at least one step");
  if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0)) {
    throw NumericalError("schedule requires 0 < beta_min <= beta_max < 1");
  }
  DiffusionSchedule s;
  s.steps = steps;
  s.betas.resize(steps);
  s.alphas.resize(steps);
  double product = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double beta =
        steps == 1 ? beta_min
                   : beta_min + (beta_max - beta_min) * static_cast<double>(i) /
                                    static_cast<double>(steps - 1);
    s.betas[i] = beta;
    product *= 1.0 - beta;
    s.alphas[i] = product;
  }
  return s;
}

std::vector<int> ddim_subsequence(int total_steps, int steps) {
  if (steps < 1 || steps > total_steps) {
    throw NumericalError("ddim steps must lie in [1, " + std::to_string(total_steps) + "]");
  }
  std::vector<int> indices(steps);
  for (int i = 0; i < steps; ++i) {
    indices[i] = static_cast<int>(
        std::llround(static_cast<double>(total_steps) * (i + 1) / static_cast<double>(steps)));
  }
  return indices;
}

std::vector<double> step_embedding(int k, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw NumericalError("step embedding dimension must be even");
  std::vector<double> emb(dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / static_cast<double>(dim));
    emb[2 * i] = std::sin(k * freq);
    emb[2 * i + 1] = std::cos(k * freq);
  }
  return emb;
}

}  // namespace starpose
