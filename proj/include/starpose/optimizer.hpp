#pragma once

#include <cmath>

#include "starpose/tensor.hpp"

namespace starpose {

// First-order adaptive-moment gradient descent (Adam, bias-corrected):
//   m <- b1*m + (1-b1)*g        v <- b2*v + (1-b2)*g^2
//   p <- p - lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)
class AdamOptimizer {
 public:
  explicit AdamOptimizer(const ParamTable& params, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8)
      : m_(zeros_like(params)), v_(zeros_like(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamTable& params, const ParamTable& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    for (auto& [name, p] : params) {
      const Tensor& g = param(grads, name);
      Tensor& m = param_mut(m_, name);
      Tensor& v = param_mut(v_, name);
      for (std::int64_t i = 0; i < p.size(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
        p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
      }
    }
  }

 private:
  ParamTable m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

// Stepwise exponential decay: lr * decay^(epoch / every), integer division.
inline double decayed_lr(double base, double decay, int every, int epoch) {
  return base * std::pow(decay, every > 0 ? epoch / every : 0);
}

}  // namespace starpose
