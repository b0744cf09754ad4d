#pragma once

#include <cstdint>
#include <vector>

#include "starpose/nn.hpp"
#include "starpose/skeleton.hpp"
#include "starpose/tensor.hpp"

namespace starpose {

// Noise-residual predictor: per-joint input projection over the pose plus
// broadcast conditions, stacked blocks of two graph convolutions over the
// skeleton adjacency and one multi-head self-attention over joints, both
// wrapped in residual connections, then a 3-channel output head.
struct DenoiserConfig {
  int hidden = 64;
  int heads = 4;
  int blocks = 3;
  int context_dim = 32;   // f_2d length
  int history_dim = 32;   // f_his length
  int step_dim = 32;      // sinusoidal step embedding length, even

  int input_dim() const { return 3 + context_dim + history_dim + step_dim; }
};

ParamTable denoiser_init(const DenoiserConfig& cfg, std::uint64_t seed);

struct DenoiserBlockTape {
  Tensor x_in;
  Tensor s1, h1;  // first graph conv: aggregate, post-tanh
  Tensor s2, h2;  // second graph conv
  Tensor z;       // residual sum feeding attention
  nn::AttentionTape attn;
  Tensor attn_out;
};

struct DenoiserTape {
  Tensor features;  // {J, input_dim}
  Tensor x0;        // after input projection
  std::vector<DenoiserBlockTape> blocks;
  Tensor x_final;
};

// Predicts the per-joint noise residual for a flattened pose h_k under the
// given conditions. All conditions are broadcast to every joint.
std::vector<double> denoiser_forward(const ParamTable& params, const DenoiserConfig& cfg,
                                     const nn::NormalizedGraph& adjacency,
                                     const std::vector<double>& h_k,
                                     const std::vector<double>& f_2d,
                                     const std::vector<double>& f_his,
                                     const std::vector<double>& k_embed,
                                     DenoiserTape* tape = nullptr);

// Accumulates parameter gradients for upstream d_out (flattened J*3) and
// optionally returns input gradients for the pose and the history condition.
void denoiser_backward(const ParamTable& params, const DenoiserConfig& cfg,
                       const nn::NormalizedGraph& adjacency, const DenoiserTape& tape,
                       const std::vector<double>& d_out, ParamTable& grads,
                       std::vector<double>* d_hk = nullptr,
                       std::vector<double>* d_fhis = nullptr);

// Skeleton adjacency normalized for graph convolution.
nn::NormalizedGraph skeleton_graph(const SkeletonTopology& topo);

}  // namespace starpose
