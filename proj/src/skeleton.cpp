#include "starpose/skeleton.hpp"

#include <cmath>
#include <set>

#include "starpose/errors.hpp"

namespace starpose {

SkeletonTopology make_topology(int num_joints, int root_index, std::vector<int> parents,
                               std::vector<std::pair<int, int>> symmetry_pairs,
                               std::vector<double> joint_weights,
                               std::vector<std::string> joint_names) {
  SkeletonTopology topo;
  topo.num_joints = num_joints;
  topo.root_index = root_index;
  topo.parents = std::move(parents);
  topo.symmetry_pairs = std::move(symmetry_pairs);
  topo.joint_weights = std::move(joint_weights);
  topo.joint_names = std::move(joint_names);
  for (int j = 0; j < num_joints; ++j) {
    if (j == root_index) continue;
    if (j < static_cast<int>(topo.parents.size())) {
      topo.bones.emplace_back(topo.parents[j], j);
    }
  }
  return topo;
}

SkeletonTopology default_topology_17() {
  // 0 pelvis, 1-3 right leg, 4-6 left leg, 7 spine, 8 thorax, 9 neck,
  // 10 head, 11-13 left arm, 14-16 right arm.
  std::vector<int> parents = {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};
  std::vector<std::string> names = {
      "pelvis",        "right_hip",   "right_knee",  "right_ankle", "left_hip",
      "left_knee",     "left_ankle",  "spine",       "thorax",      "neck",
      "head",          "left_shoulder", "left_elbow", "left_wrist",  "right_shoulder",
      "right_elbow",   "right_wrist"};
  // Bone q has child joint q+1, so: 0 r_hip, 1 r_thigh, 2 r_shin, 3 l_hip,
  // 4 l_thigh, 5 l_shin, 10 l_shoulder, 11 l_upper_arm, 12 l_forearm,
  // 13 r_shoulder, 14 r_upper_arm, 15 r_forearm.
  std::vector<std::pair<int, int>> sym = {{3, 0},  {4, 1},  {5, 2},
                                          {10, 13}, {11, 14}, {12, 15}};
  std::vector<double> weights(17, 1.0);
  return make_topology(17, 0, std::move(parents), std::move(sym), std::move(weights),
                       std::move(names));
}

std::vector<std::string> validate_topology(const SkeletonTopology& topo) {
  std::vector<std::string> violations;
  const int J = topo.num_joints;
  if (J <= 0) {
    violations.push_back("num_joints must be positive");
    return violations;
  }
  if (topo.root_index < 0 || topo.root_index >= J) {
    violations.push_back("root index out of range");
    return violations;
  }
  if (static_cast<int>(topo.parents.size()) != J) {
    violations.push_back("parents length != num_joints");
    return violations;
  }
  if (topo.parents[topo.root_index] != -1) {
    violations.push_back("root joint must have parent sentinel -1");
  }
  for (int j = 0; j < J; ++j) {
    if (j == topo.root_index) continue;
    if (topo.parents[j] < 0 || topo.parents[j] >= J) {
      violations.push_back("joint " + std::to_string(j) + " has out-of-range parent");
    }
  }
  // Walk up from every joint; more than J hops means a cycle.
  bool acyclic = true;
  for (int j = 0; j < J; ++j) {
    int cur = j, hops = 0;
    while (cur != topo.root_index && hops <= J) {
      if (cur < 0 || cur >= J || topo.parents[cur] < 0 || topo.parents[cur] >= J) break;
      cur = topo.parents[cur];
      ++hops;
    }
    if (hops > J) {
      violations.push_back("cycle detected through joint " + std::to_string(j));
      acyclic = false;
      break;
    }
    if (cur != topo.root_index && j != topo.root_index && acyclic) {
      violations.push_back("joint " + std::to_string(j) + " not connected to root");
    }
  }
  if (static_cast<int>(topo.bones.size()) != J - 1) {
    violations.push_back("bone count != num_joints - 1");
  }
  const int Q = static_cast<int>(topo.bones.size());
  std::set<int> used;
  for (const auto& [left, right] : topo.symmetry_pairs) {
    if (left < 0 || left >= Q || right < 0 || right >= Q) {
      violations.push_back("symmetry pair references out-of-range bone");
      continue;
    }
    if (left == right) violations.push_back("symmetry pair references the same bone twice");
    if (!used.insert(left).second || !used.insert(right).second) {
      violations.push_back("bone appears in more than one symmetry pair");
    }
  }
  if (static_cast<int>(topo.joint_weights.size()) != J) {
    violations.push_back("joint_weights length != num_joints");
  } else {
    for (int j = 0; j < J; ++j) {
      if (!(topo.joint_weights[j] > 0.0) || !std::isfinite(topo.joint_weights[j])) {
        violations.push_back("non-positive weight at joint " + std::to_string(j));
      }
    }
  }
  return violations;
}

std::vector<double> bone_lengths(const Pose3d& pose, const SkeletonTopology& topo) {
  if (pose.joint_count() != topo.num_joints) {
    throw ShapeMismatch("bone_lengths: pose has " + std::to_string(pose.joint_count()) +
                        " joints, topology expects " + std::to_string(topo.num_joints));
  }
  std::vector<double> lengths(topo.bones.size());
  for (std::size_t q = 0; q < topo.bones.size(); ++q) {
    const double* a = pose.joint(topo.bones[q].first);
    const double* b = pose.joint(topo.bones[q].second);
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    lengths[q] = std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return lengths;
}

}  // namespace starpose
