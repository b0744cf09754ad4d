#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "starpose/tensor.hpp"

namespace starpose::nn {

// Symmetric-normalized graph with self-loops, stored as a weighted edge
// list (both directions plus loops). Applying it is its own transpose.
struct NormalizedGraph {
  int nodes = 0;
  std::vector<int> from;
  std::vector<int> to;
  std::vector<double> weight;
};

// Builds D^(-1/2) (A + I) D^(-1/2) from an undirected edge list.
NormalizedGraph normalize_graph(int nodes, const std::vector<std::pair<int, int>>& edges);

// S = A_hat * X, rows are node features.
void graph_apply(const NormalizedGraph& g, const Tensor& x, Tensor& out);

// Y[t] = W * X[t] + b. W is {out, in}; b may be null.
void linear_forward(const Tensor& x, const Tensor& w, const Tensor* b, Tensor& y);
// Accumulates into dw/db/dx; dx may be null.
void linear_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor& dw,
                     Tensor* db, Tensor* dx);

void tanh_inplace(Tensor& x);
// dx += dy * (1 - y^2) where y is the forward output.
void tanh_backward(const Tensor& y, const Tensor& dy, Tensor& dx);

// Multi-head self-attention over the rows of X (tokens). Parameters are
// read from a table under `prefix`: wq, wk, wv (no bias), wo, bo.
struct AttentionTape {
  Tensor x;      // input tokens
  Tensor q, k, v;
  Tensor probs;  // {heads, T, T} softmax rows
  Tensor ctx;    // concatenated head outputs before the output projection
};

// Registers zero-initialized attention parameters (overwritten by init).
void attention_declare(ParamTable& params, const std::string& prefix, int dim);

void attention_forward(const Tensor& x, const ParamTable& params, const std::string& prefix,
                       int heads, Tensor& y, AttentionTape* tape);
// Accumulates parameter gradients and dx (may be null).
void attention_backward(const AttentionTape& tape, const ParamTable& params,
                        const std::string& prefix, int heads, const Tensor& dy,
                        ParamTable& grads, Tensor* dx);

// Fan-in scaled uniform init in [-sqrt(6/fan_in), +sqrt(6/fan_in)] for
// every tensor whose name ends in a weight suffix; bias-like tensors stay
// zero. fan_in is the second dimension for matrices.
void init_fan_in_uniform(ParamTable& params, std::uint64_t seed);

}  // namespace starpose::nn
