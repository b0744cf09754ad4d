#pragma once

#include <cstdint>
#include <vector>

#include "starpose/pose.hpp"
#include "starpose/tensor.hpp"

namespace starpose {

// Compact 2D spatial-temporal encoder. Per-joint embedding, mean pool over
// joints, per-frame aggregation, mean pool over frames, output projection.
// Hidden layers carry no bias, so an all-zero window maps to the projection
// bias exactly; mean pooling makes the output frame-order invariant.
struct ContextEncoderConfig {
  int embed_dim = 32;  // hidden width
  int out_dim = 32;    // context vector length
};

// Parameter names: context/embed/w {E,2}, context/agg/w {E,E},
// context/proj/w {C,E}, context/proj/b {C}.
ParamTable context_init(const ContextEncoderConfig& cfg, std::uint64_t seed);

std::vector<double> encode_context(const ParamTable& params, const ContextEncoderConfig& cfg,
                                   const std::vector<Pose2d>& window);

// Forward with caches plus backward, used by pretraining and gradient tests.
struct ContextTape {
  std::vector<Tensor> embedded;  // per frame, {J, E} post-tanh
  Tensor frame_feats;            // {F, E} joint means
  Tensor agg;                    // {F, E} post-tanh
  Tensor pooled;                 // {1, E}
  Tensor out;                    // {1, C}
};

void context_forward(const ParamTable& params, const ContextEncoderConfig& cfg,
                     const std::vector<Pose2d>& window, ContextTape& tape);
void context_backward(const ParamTable& params, const ContextEncoderConfig& cfg,
                      const std::vector<Pose2d>& window, const ContextTape& tape,
                      const std::vector<double>& d_out, ParamTable& grads);

// Center-frame 3D regression pretraining of the encoder plus a linear head.
struct ContextPretrainExample {
  std::vector<Pose2d> window;
  std::vector<double> target;  // flattened root-relative 3D pose
};

struct ContextPretrainResult {
  ParamTable encoder;             // frozen after pretraining
  std::vector<double> loss_curve; // mean squared error per epoch
};

struct ContextPretrainOptions {
  int epochs = 30;
  int batch_size = 64;
  double lr = 1e-3;
};

ContextPretrainResult pretrain_context(const std::vector<ContextPretrainExample>& dataset,
                                       const ContextEncoderConfig& cfg,
                                       const ContextPretrainOptions& opts, std::uint64_t seed);

}  // namespace starpose
