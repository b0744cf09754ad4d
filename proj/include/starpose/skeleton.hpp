#pragma once

#include <string>
#include <utility>
#include <vector>

#include "starpose/pose.hpp"

namespace starpose {

// Joint topology shared by every loss and graph construction. Immutable
// after construction; safe to share across threads.
struct SkeletonTopology {
  int num_joints = 0;
  int root_index = 0;
  std::vector<int> parents;                         // parents[root] == -1
  std::vector<std::pair<int, int>> bones;           // (parent, child); bone q has child q', ordered by child id
  std::vector<std::pair<int, int>> symmetry_pairs;  // (left bone index, right bone index)
  std::vector<double> joint_weights;                // per-joint motion weights, > 0
  std::vector<std::string> joint_names;             // optional labels
};

// Derives the bone list from parents and assembles a topology value.
SkeletonTopology make_topology(int num_joints, int root_index, std::vector<int> parents,
                               std::vector<std::pair<int, int>> symmetry_pairs,
                               std::vector<double> joint_weights,
                               std::vector<std::string> joint_names = {});

// Standard 17-joint body: pelvis root, spine/neck/head chain, 3-bone arms
// and legs. 16 bones, 6 left/right symmetry pairs, unit joint weights.
SkeletonTopology default_topology_17();

// Returns every invariant violation found; empty means valid.
std::vector<std::string> validate_topology(const SkeletonTopology& topo);

// Euclidean length of each bone, in bone order.
std::vector<double> bone_lengths(const Pose3d& pose, const SkeletonTopology& topo);

}  // namespace starpose
