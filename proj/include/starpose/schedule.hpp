#pragma once

#include <vector>

namespace starpose {

// Noise schedule for the diffusion process. betas[i] is the step-(i+1)
// increment; alphas[i] is the running product of (1 - beta) up to step i+1,
// so alphas is strictly decreasing with values in (0, 1].
struct DiffusionSchedule {
  int steps = 0;  // K
  std::vector<double> betas;
  std::vector<double> alphas;

  // alpha at step k with alpha_0 == 1 (the clean end of the chain).
  double alpha_at(int k) const { return k == 0 ? 1.0 : alphas.at(static_cast<std::size_t>(k - 1)); }
  double beta_at(int k) const { return betas.at(static_cast<std::size_t>(k - 1)); }
};

DiffusionSchedule linear_schedule(int steps, double beta_min, double beta_max);

// Evenly spaced step indices over [1, K], strictly increasing, last == K.
std::vector<int> ddim_subsequence(int total_steps, int steps);

// Sinusoidal embedding of step k: interleaved (sin, cos) pairs at
// frequencies 1/10000^(2i/dim). dim must be even.
std::vector<double> step_embedding(int k, int dim);

}  // namespace starpose
