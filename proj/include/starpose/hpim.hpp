#pragma once

#include <cstdint>
#include <deque>
#include <utility>
#include <vector>

#include "starpose/nn.hpp"
#include "starpose/pose.hpp"
#include "starpose/skeleton.hpp"
#include "starpose/tensor.hpp"

namespace starpose {

struct HistoryEntry {
  Pose2d observed_2d;
  Pose3d predicted_3d;  // root-relative
  long frame_index = 0;
};

// Bounded FIFO of past (2D observation, 3D prediction) pairs with strictly
// contiguous frame indices. Owned by exactly one sequence-inference task.
class HistoryBuffer {
 public:
  explicit HistoryBuffer(int capacity) : capacity_(capacity) {}

  void push(Pose2d observed_2d, Pose3d predicted_3d, long frame_index);
  void clear() { entries_.clear(); }

  int capacity() const { return capacity_; }
  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }
  const HistoryEntry& entry(int i) const { return entries_[i]; }  // 0 = oldest

  // Past root-relative 3D poses, oldest first (for the sliding-window loss).
  std::vector<Pose3d> poses_3d() const;

 private:
  int capacity_;
  std::deque<HistoryEntry> entries_;
};

// Two nodes per joint per frame (a 2D-stream and a 3D-stream node), with
// skeleton edges inside each stream, one cross-dimensional edge per joint,
// and temporal edges linking the same node across consecutive frames.
struct IntegrationGraph {
  int nodes = 0;
  std::vector<std::pair<int, int>> skeleton_edges;
  std::vector<std::pair<int, int>> cross_edges;
  std::vector<std::pair<int, int>> temporal_edges;

  std::vector<std::pair<int, int>> all_edges() const;
  nn::NormalizedGraph normalized() const;
};

IntegrationGraph build_integration_graph(const SkeletonTopology& topo, int window_len);

struct HpimConfig {
  int dim = 32;        // node feature width
  int out_dim = 32;    // f_his length
  int heads = 4;
  int max_window = 27; // L
};

ParamTable hpim_init(const HpimConfig& cfg, const SkeletonTopology& topo, std::uint64_t seed);

struct HpimFrameTape {
  Tensor joints2d, joints3d;    // raw inputs
  Tensor p2d, p3d;              // embedded + spatial positional embedding
  nn::AttentionTape enc2d, enc3d;
  Tensor z2d, z3d;              // encoder outputs before temporal embedding
};

struct HpimTape {
  int window_len = 0;
  std::vector<HpimFrameTape> frames;
  nn::NormalizedGraph graph;
  Tensor x;                     // stacked node features
  Tensor g1_s, g1;              // round-1 graph branch (aggregate, post-tanh)
  nn::AttentionTape a1;
  Tensor a1_out;
  Tensor fused;                 // f' = f_G + f_A
  Tensor g2_s, g2;
  nn::AttentionTape a2;
  Tensor a2_out;
  Tensor pooled;                // {1, dim}
  bool used_null = false;
};

// Empty history maps to the trained null embedding (zero at init).
std::vector<double> encode_history(const ParamTable& params, const HpimConfig& cfg,
                                   const HistoryBuffer& buffer, const SkeletonTopology& topo,
                                   HpimTape* tape = nullptr);

void hpim_backward(const ParamTable& params, const HpimConfig& cfg, const HpimTape& tape,
                   const SkeletonTopology& topo, const std::vector<double>& d_fhis,
                   ParamTable& grads);

}  // namespace starpose
